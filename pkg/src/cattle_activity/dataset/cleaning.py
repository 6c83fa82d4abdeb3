"""Duplicate removal, short-gap interpolation and outlier clamping."""
from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import groupby

import numpy as np

from .samples import Sample, is_finite_sample, sort_samples


@dataclass(frozen=True)
class CleaningPolicy:
    max_gap: int = 3                # longest run of missing samples to interpolate
    clamp_g: float = 16.0
    sample_period_ms: int | None = None  # None: median spacing per device


@dataclass
class CleaningReport:
    duplicates_removed: int = 0
    rows_interpolated: int = 0
    rows_dropped: int = 0
    outliers_clamped: int = 0

    def as_text(self) -> str:
        return "".join(f"{k}\t{v}\n" for k, v in vars(self).items())


def infer_period(timestamps) -> int | None:
    diffs = np.diff(np.asarray(timestamps, dtype=np.int64))
    diffs = diffs[diffs > 0]
    if diffs.size == 0:
        return None
    return int(np.median(diffs))


def _clamp(s: Sample, limit: float) -> tuple[Sample, int]:
    vals = [min(max(v, -limit), limit) for v in s.xyz]
    n = sum(v != orig for v, orig in zip(vals, s.xyz))
    if not n:
        return s, 0
    return replace(s, acc_x=vals[0], acc_y=vals[1], acc_z=vals[2]), n


def clean(samples, policy: CleaningPolicy = CleaningPolicy()) -> tuple[list[Sample], CleaningReport]:
    """Clean a sample stream device by device.

    Rows with non-finite values are dropped (leaving a gap), repeated
    (device_id, timestamp) keys keep their first row, values beyond
    ``±clamp_g`` are clamped, and runs of at most ``max_gap`` missing
    samples are filled by linear interpolation. Longer gaps are left alone
    and act as segment boundaries for windowing.
    """
    report = CleaningReport()
    out: list[Sample] = []
    for _, group in groupby(sort_samples(samples), key=lambda s: s.device_id):
        rows = []
        last_ts = None
        for s in group:
            if not is_finite_sample(s):
                report.rows_dropped += 1
                continue
            if s.timestamp == last_ts:
                report.duplicates_removed += 1
                continue
            last_ts = s.timestamp
            s, n = _clamp(s, policy.clamp_g)
            report.outliers_clamped += n
            rows.append(s)
        period = policy.sample_period_ms or infer_period([s.timestamp for s in rows])
        if not period or not rows:
            out.extend(rows)
            continue
        out.append(rows[0])
        for prev, nxt in zip(rows, rows[1:]):
            gap = nxt.timestamp - prev.timestamp
            missing = gap // period - 1
            if gap % period == 0 and 1 <= missing <= policy.max_gap:
                for k in range(1, missing + 1):
                    f = k / (missing + 1)
                    label = prev.label if f <= 0.5 else nxt.label
                    out.append(Sample(
                        prev.device_id, prev.timestamp + k * period,
                        prev.acc_x + f * (nxt.acc_x - prev.acc_x),
                        prev.acc_y + f * (nxt.acc_y - prev.acc_y),
                        prev.acc_z + f * (nxt.acc_z - prev.acc_z),
                        label,
                    ))
                report.rows_interpolated += missing
            out.append(nxt)
    return out, report
