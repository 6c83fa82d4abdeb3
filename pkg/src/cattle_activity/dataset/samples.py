"""Sample records and the sample CSV format."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..table import SchemaError, atomic_write

log = logging.getLogger(__name__)

SAMPLE_COLUMNS = ("device_id", "timestamp", "acc_x", "acc_y", "acc_z", "label")

# accepted header spellings, compared lower-cased
_ALIASES = {
    "device_id": {"device_id", "deviceid", "device"},
    "timestamp": {"timestamp", "time", "ts"},
    "acc_x": {"acc_x", "accx", "x"},
    "acc_y": {"acc_y", "accy", "y"},
    "acc_z": {"acc_z", "accz", "z"},
    "label": {"label", "class", "activity"},
}


class FormatError(ValueError):
    """Input file cannot be read as delimited text."""


@dataclass(frozen=True, slots=True)
class Sample:
    device_id: str
    timestamp: int
    acc_x: float
    acc_y: float
    acc_z: float
    label: str | None = None

    @property
    def key(self) -> tuple[str, int]:
        return (self.device_id, self.timestamp)

    @property
    def xyz(self) -> tuple[float, float, float]:
        return (self.acc_x, self.acc_y, self.acc_z)


def sort_samples(samples: Iterable[Sample]) -> list[Sample]:
    return sorted(samples, key=lambda s: (s.device_id, s.timestamp))


def _resolve_header(header: Sequence[str]) -> dict[str, int]:
    found = {}
    for pos, name in enumerate(header):
        name = name.strip().lower()
        for canon, spellings in _ALIASES.items():
            if name in spellings and canon not in found:
                found[canon] = pos
    return found


def parse_samples(path, rejects_path=None, device_id: str | None = None,
                  sample_period_ms: int | None = None,
                  start_timestamp: int = 0) -> list[Sample]:
    """Read a sample CSV, returning samples sorted by (device_id, timestamp).

    Files that only carry the four data columns (AccX, AccY, AccZ, Label)
    need `device_id` and `sample_period_ms`; timestamps are then synthesised
    as ``start_timestamp + row * sample_period_ms``.

    Malformed rows go to `rejects_path` (default: ``<stem>.rejects.csv``
    next to the input) with their line number and the reason.
    """
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (UnicodeDecodeError, csv.Error) as exc:
        raise FormatError(f"{path}: not readable as delimited text ({exc})") from exc
    if not rows:
        raise FormatError(f"{path}: no header row")
    header, body = rows[0], rows[1:]
    cols = _resolve_header(header)
    missing = [c for c in ("acc_x", "acc_y", "acc_z") if c not in cols]
    inject = "device_id" not in cols or "timestamp" not in cols
    if inject and (device_id is None or sample_period_ms is None):
        missing += [c for c in ("device_id", "timestamp") if c not in cols]
    if missing:
        raise SchemaError(f"{path}: missing required columns {missing}")

    samples, rejects = [], []
    for row_no, row in enumerate(body):
        lineno = row_no + 2
        if not row or all(not f.strip() for f in row):
            continue
        if len(row) != len(header):
            rejects.append((lineno, f"expected {len(header)} fields, got {len(row)}", row))
            continue
        try:
            dev = row[cols["device_id"]].strip() if "device_id" in cols else device_id
            if "timestamp" in cols:
                ts = int(row[cols["timestamp"]])
            else:
                ts = start_timestamp + row_no * sample_period_ms
            x, y, z = (float(row[cols[c]]) for c in ("acc_x", "acc_y", "acc_z"))
        except ValueError as exc:
            rejects.append((lineno, str(exc), row))
            continue
        label = row[cols["label"]].strip() if "label" in cols else ""
        samples.append(Sample(dev, ts, x, y, z, label or None))

    if rejects:
        rejects_path = Path(rejects_path) if rejects_path else path.with_name(path.stem + ".rejects.csv")
        with atomic_write(rejects_path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["line", "reason"] + list(header))
            for lineno, reason, row in rejects:
                w.writerow([lineno, reason] + row)
        log.warning("%s: %d malformed rows written to %s", path, len(rejects), rejects_path)
    return sort_samples(samples)


def write_samples(path, samples: Iterable[Sample]) -> None:
    with atomic_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SAMPLE_COLUMNS)
        for s in samples:
            w.writerow([s.device_id, s.timestamp, repr(s.acc_x), repr(s.acc_y),
                        repr(s.acc_z), s.label or ""])


def samples_to_arrays(samples: Sequence[Sample]):
    """Column arrays (device_id, timestamp, xyz, label) for vectorised work."""
    n = len(samples)
    dev = np.empty(n, dtype=object)
    lab = np.empty(n, dtype=object)
    ts = np.empty(n, dtype=np.int64)
    xyz = np.empty((n, 3), dtype=float)
    for i, s in enumerate(samples):
        dev[i] = s.device_id
        ts[i] = s.timestamp
        xyz[i] = (s.acc_x, s.acc_y, s.acc_z)
        lab[i] = s.label
    return dev, ts, xyz, lab


def is_finite_sample(s: Sample) -> bool:
    return math.isfinite(s.acc_x) and math.isfinite(s.acc_y) and math.isfinite(s.acc_z)
