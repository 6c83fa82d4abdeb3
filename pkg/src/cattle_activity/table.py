"""FeatureTable: the rectangular unit passed between pipeline stages."""
from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

META_COLUMNS = ("device_id", "timestamp_max", "label", "degenerate")


class SchemaError(ValueError):
    """A table or file is missing required columns or has malformed rows."""


@dataclass
class FeatureTable:
    """Named feature columns per window row, plus per-row metadata.

    ``label`` holds ``None`` for unlabeled rows. ``degenerate`` marks rows
    whose moment statistics were computed on a zero-variance window.
    """

    columns: list[str]
    values: np.ndarray
    device_id: np.ndarray
    timestamp_max: np.ndarray
    label: np.ndarray
    degenerate: np.ndarray

    def __post_init__(self):
        self.columns = list(self.columns)
        self.values = np.asarray(self.values, dtype=float).reshape(-1, len(self.columns))
        n = self.values.shape[0]
        self.device_id = np.asarray(self.device_id, dtype=object).reshape(n)
        self.timestamp_max = np.asarray(self.timestamp_max, dtype=np.int64).reshape(n)
        self.label = np.asarray(self.label, dtype=object).reshape(n)
        self.degenerate = np.asarray(self.degenerate, dtype=bool).reshape(n)
        if len(set(self.columns)) != len(self.columns):
            dupes = sorted({c for c in self.columns if self.columns.count(c) > 1})
            raise SchemaError(f"duplicate column names: {dupes}")

    @classmethod
    def empty(cls, columns: Sequence[str]) -> "FeatureTable":
        return cls(list(columns), np.empty((0, len(columns))), [], [], [], [])

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return len(self.columns)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.columns.index(name)]
        except ValueError:
            raise SchemaError(f"no column named {name!r}") from None

    def select(self, names: Sequence[str]) -> "FeatureTable":
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise SchemaError(f"missing feature columns: {missing}")
        idx = [self.columns.index(n) for n in names]
        return FeatureTable(list(names), self.values[:, idx], self.device_id,
                            self.timestamp_max, self.label, self.degenerate)

    def take(self, rows) -> "FeatureTable":
        rows = np.asarray(rows)
        return FeatureTable(self.columns, self.values[rows], self.device_id[rows],
                            self.timestamp_max[rows], self.label[rows],
                            self.degenerate[rows])

    @classmethod
    def concat(cls, tables: Iterable["FeatureTable"]) -> "FeatureTable":
        tables = list(tables)
        if not tables:
            raise ValueError("nothing to concatenate")
        cols = tables[0].columns
        for t in tables[1:]:
            if t.columns != cols:
                raise SchemaError("cannot concatenate tables with different columns")
        return cls(cols,
                   np.vstack([t.values for t in tables]),
                   np.concatenate([t.device_id for t in tables]),
                   np.concatenate([t.timestamp_max for t in tables]),
                   np.concatenate([t.label for t in tables]),
                   np.concatenate([t.degenerate for t in tables]))

    def labels(self) -> np.ndarray:
        if any(lbl is None for lbl in self.label):
            raise SchemaError("table contains unlabeled rows")
        return self.label.astype(str)

    def to_csv(self, path) -> None:
        """Write metadata columns then feature columns; floats use repr()."""
        path = Path(path)
        with atomic_write(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(META_COLUMNS) + self.columns)
            for i in range(len(self)):
                lbl = self.label[i]
                w.writerow([self.device_id[i], int(self.timestamp_max[i]),
                            "" if lbl is None else lbl, int(self.degenerate[i])]
                           + [repr(float(v)) for v in self.values[i]])

    @classmethod
    def from_csv(cls, path) -> "FeatureTable":
        path = Path(path)
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise SchemaError(f"{path}: empty file") from None
            if tuple(header[:len(META_COLUMNS)]) != META_COLUMNS:
                raise SchemaError(
                    f"{path}: header must start with {', '.join(META_COLUMNS)}"
                )
            columns = header[len(META_COLUMNS):]
            dev, ts, lab, deg, vals = [], [], [], [], []
            for lineno, row in enumerate(reader, start=2):
                if len(row) != len(header):
                    raise SchemaError(
                        f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                    )
                dev.append(row[0])
                ts.append(int(row[1]))
                lab.append(row[2] or None)
                deg.append(row[3] == "1")
                vals.append([float(v) for v in row[4:]])
        values = np.array(vals, dtype=float).reshape(len(vals), len(columns))
        return cls(columns, values, dev, ts, lab, deg)


class atomic_write:
    """Context manager writing text to a temp file renamed over `path` on success."""

    def __init__(self, path, mode: str = "w"):
        self.path = Path(path)
        self.mode = mode

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        fd, self.tmp = tempfile.mkstemp(dir=self.path.parent, prefix=f".{self.path.name}.")
        kwargs = {} if "b" in self.mode else {"newline": "", "encoding": "utf-8"}
        self.fh = os.fdopen(fd, self.mode, **kwargs)
        return self.fh

    def __exit__(self, exc_type, exc, tb):
        self.fh.close()
        if exc_type is None:
            os.replace(self.tmp, self.path)
        else:
            os.unlink(self.tmp)
        return False
