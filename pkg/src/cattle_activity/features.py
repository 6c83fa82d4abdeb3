"""Sliding-window feature extraction and lag augmentation.

Per window the extractor emits, in this order:

* the final raw sample ``AccX, AccY, AccZ`` and the Savitzky-Golay value at
  the same position ``sg_filter_AccX`` ...;
* whole-window scalars ``SMA, VM, MovVar, Energy, Entropy, Roll, Pitch``;
* for each axis, 13 moment/order statistics followed by mean, variance,
  standard deviation and energy of the ``A, D1, D2, D3`` wavelet bands.

Lag columns ``<name>_lag_<k>`` are appended by :func:`add_lag_features`.
"""
from __future__ import annotations

import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import groupby
from typing import Sequence

import numpy as np

from .dataset.labels import ALL_CODES
from .dataset.samples import Sample, samples_to_arrays
from .signal import dwt_decompose, savitzky_golay, shannon_entropy
from .table import FeatureTable

log = logging.getLogger(__name__)

AXES = ("X", "Y", "Z")
STATS = ("mean", "std", "sum", "var", "mad", "median", "min", "max",
         "quan_25", "quan_50", "quan_75", "kurt", "skew")
BAND_STATS = ("mean", "var", "std", "energy")
GLOBALS = ("SMA", "VM", "MovVar", "Energy", "Entropy", "Roll", "Pitch")


class NamingError(ValueError):
    pass


class OrderingError(ValueError):
    pass


class OrientationError(ValueError):
    pass


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class WindowConfig:
    window_length: int = 156
    step_length: int = 39
    max_lag: int = 5
    sg_window: int = 11
    sg_polyorder: int = 3
    wavelet: str = "db4"
    wavelet_levels: int = 3
    wavelet_mode: str = "symmetric"
    entropy_bins: int = 10
    # split device streams where consecutive timestamps differ by more than
    # this; None means 1.5x the device's median sample spacing
    max_gap_ms: int | None = None

    def __post_init__(self):
        if self.window_length < 2 or self.step_length < 1:
            raise ParameterError("window_length must be >= 2 and step_length >= 1")
        if self.step_length > self.window_length:
            raise ParameterError(
                f"step_length {self.step_length} exceeds window_length {self.window_length}"
            )
        if self.max_lag < 0:
            raise ParameterError("max_lag must be non-negative")
        if self.sg_window > self.window_length:
            raise ParameterError("sg_window cannot exceed window_length")


@dataclass(frozen=True)
class Window:
    samples: np.ndarray       # (n, 3) acc_x, acc_y, acc_z
    start_index: int
    timestamp_max: int


def _xyz(window) -> np.ndarray:
    arr = window.samples if isinstance(window, Window) else window
    arr = np.asarray(arr, dtype=float).reshape(-1, 3)
    if arr.shape[0] == 0:
        raise ParameterError("window is empty")
    return arr


# -- naming ------------------------------------------------------------------

def feature_name(axis: str | None, family: str, stat: str | None = None,
                 lag: int | None = None) -> str:
    """Canonical column name.

    `family` is ``raw``, ``sg_filter``, ``stat``, a wavelet band (``A``,
    ``D1``.., optionally prefixed ``wavelet-``) or one of the axis-free
    scalars in ``GLOBALS``.

    >>> feature_name("Y", "wavelet-D3", "mean")
    'AccY_D3_mean'
    >>> feature_name(None, "Entropy", lag=3)
    'Entropy_lag_3'
    """
    if family.startswith("wavelet-"):
        family = family[len("wavelet-"):]
    if family in GLOBALS:
        if axis is not None or stat is not None:
            raise NamingError(f"{family} takes neither an axis nor a statistic")
        name = family
    else:
        if axis not in AXES:
            raise NamingError(f"axis must be one of {AXES} for family {family!r}, got {axis!r}")
        acc = f"Acc{axis}"
        if family == "raw":
            if stat is not None:
                raise NamingError("raw values take no statistic")
            name = acc
        elif family == "sg_filter":
            if stat is not None:
                raise NamingError("sg_filter values take no statistic")
            name = f"sg_filter_{acc}"
        elif family == "stat":
            if stat not in STATS:
                raise NamingError(f"unknown window statistic {stat!r}")
            name = f"{acc}_{stat}"
        elif family == "A" or (family[:1] == "D" and family[1:].isdigit() and int(family[1:]) >= 1):
            if stat not in BAND_STATS:
                raise NamingError(f"unknown wavelet band statistic {stat!r}")
            name = f"{acc}_{family}_{stat}"
        else:
            raise NamingError(f"unknown feature family {family!r}")
    if lag is not None:
        if lag < 1:
            raise NamingError(f"lag must be >= 1, got {lag}")
        name = f"{name}_lag_{lag}"
    return name


def base_feature_names(levels: int = 3) -> list[str]:
    bands = ["A"] + [f"D{i}" for i in range(1, levels + 1)]
    names = [feature_name(a, "raw") for a in AXES]
    names += [feature_name(a, "sg_filter") for a in AXES]
    names += list(GLOBALS)
    for a in AXES:
        names += [feature_name(a, "stat", s) for s in STATS]
        names += [feature_name(a, b, s) for b in bands for s in BAND_STATS]
    return names


# -- per-window measures -----------------------------------------------------

def signal_magnitude_area(window) -> float:
    xyz = _xyz(window)
    return float(np.abs(xyz).sum(axis=1).mean())


def vector_magnitude(sample) -> float:
    x, y, z = sample
    return math.sqrt(x * x + y * y + z * z)


def mean_vector_magnitude(window) -> float:
    xyz = _xyz(window)
    return float(np.sqrt((xyz * xyz).sum(axis=1)).mean())


def movement_variation(window) -> float:
    xyz = _xyz(window)
    if xyz.shape[0] < 2:
        raise ParameterError("movement variation needs at least two samples")
    return float(np.abs(np.diff(xyz, axis=0)).sum() / (xyz.shape[0] - 1))


def orientation_angles(window) -> tuple[float, float]:
    """(roll, pitch) in radians of the window's mean acceleration vector."""
    mx, my, mz = _xyz(window).mean(axis=0)
    if mx == 0 and my == 0 and mz == 0:
        raise OrientationError("mean acceleration is zero; orientation undefined")
    return math.atan2(my, mz), math.atan2(-mx, math.hypot(my, mz))


def window_statistics(axis_series) -> dict[str, float]:
    """Thirteen population statistics of one axis.

    Quantiles interpolate linearly between order statistics. A constant
    series reports zero spread, kurtosis and skew; callers flag it via
    :func:`is_degenerate`.
    """
    x = np.asarray(axis_series, dtype=float)
    if x.size < 2:
        raise ParameterError("window statistics need at least two samples")
    mean = x.mean()
    dev = x - mean
    q25, q50, q75 = np.quantile(x, [0.25, 0.5, 0.75])
    out = {
        "mean": float(mean), "std": 0.0, "sum": float(x.sum()), "var": 0.0,
        "mad": 0.0, "median": float(q50), "min": float(x.min()), "max": float(x.max()),
        "quan_25": float(q25), "quan_50": float(q50), "quan_75": float(q75),
        "kurt": 0.0, "skew": 0.0,
    }
    if x.max() == x.min():
        return out
    m2 = np.mean(dev ** 2)
    out["var"] = float(m2)
    out["std"] = float(np.sqrt(m2))
    out["mad"] = float(np.mean(np.abs(dev)))
    out["skew"] = float(np.mean(dev ** 3) / m2 ** 1.5)
    out["kurt"] = float(np.mean(dev ** 4) / m2 ** 2 - 3.0)
    return out


def is_degenerate(axis_series) -> bool:
    x = np.asarray(axis_series, dtype=float)
    return bool(x.max() == x.min())


def wavelet_features(axis_series, levels: int = 3, wavelet: str = "db4",
                     mode: str = "symmetric") -> dict[str, float]:
    """Mean, variance, std and energy (sum of squares) of each band."""
    coeffs = dwt_decompose(axis_series, levels, wavelet, mode)
    out = {}
    for band, c in coeffs.bands().items():
        out[f"{band}_mean"] = float(c.mean())
        out[f"{band}_var"] = float(c.var())
        out[f"{band}_std"] = float(c.std())
        out[f"{band}_energy"] = float(np.dot(c, c))
    return out


def window_feature_vector(xyz: np.ndarray, config: WindowConfig) -> tuple[np.ndarray, bool]:
    """Base feature values for one window, in :func:`base_feature_names` order."""
    xyz = np.asarray(xyz, dtype=float)
    degenerate = False
    vals = list(xyz[-1])
    for a in range(3):
        vals.append(savitzky_golay(xyz[:, a], config.sg_window, config.sg_polyorder)[-1])
    vm = np.sqrt((xyz * xyz).sum(axis=1))
    try:
        roll, pitch = orientation_angles(xyz)
    except OrientationError:
        roll = pitch = 0.0
        degenerate = True
    vals += [
        signal_magnitude_area(xyz),
        float(vm.mean()),
        movement_variation(xyz),
        float((xyz * xyz).sum(axis=1).mean()),
        shannon_entropy(vm, config.entropy_bins),
        roll,
        pitch,
    ]
    for a in range(3):
        col = xyz[:, a]
        stats = window_statistics(col)
        degenerate |= is_degenerate(col)
        vals += [stats[s] for s in STATS]
        wf = wavelet_features(col, config.wavelet_levels, config.wavelet, config.wavelet_mode)
        vals += list(wf.values())
    return np.array(vals, dtype=float), degenerate


# -- table construction ------------------------------------------------------

_LABEL_RANK = {c: i for i, c in enumerate(ALL_CODES)}


def modal_label(labels: Sequence[str | None]) -> str | None:
    """Most frequent label; ties go to the earliest in the class vocabulary."""
    counts = Counter(lbl for lbl in labels if lbl is not None)
    if not counts:
        return None
    best = max(counts.values())
    tied = [c for c, n in counts.items() if n == best]
    return min(tied, key=lambda c: (_LABEL_RANK.get(c, len(_LABEL_RANK)), c))


def window_count(n: int, window_length: int, step_length: int) -> int:
    return 0 if n < window_length else (n - window_length) // step_length + 1


def _segments(ts: np.ndarray, max_gap_ms: int | None) -> list[tuple[int, int]]:
    if ts.size < 2:
        return [(0, ts.size)]
    diffs = np.diff(ts)
    limit = 1.5 * np.median(diffs) if max_gap_ms is None else max_gap_ms
    cuts = np.flatnonzero(diffs > limit) + 1
    edges = np.concatenate([[0], cuts, [ts.size]])
    return list(zip(edges[:-1], edges[1:]))


def _device_rows(args):
    dev, ts, xyz, labels, config = args
    rows, metas = [], []
    w, step = config.window_length, config.step_length
    for lo, hi in _segments(ts, config.max_gap_ms):
        for i in range(lo, hi - w + 1, step):
            vec, degenerate = window_feature_vector(xyz[i:i + w], config)
            rows.append(vec)
            metas.append((dev, int(ts[i:i + w].max()), modal_label(labels[i:i + w]), degenerate))
    return rows, metas


def _check_order(samples: Sequence[Sample]) -> None:
    seen = set()
    prev = None
    for s in samples:
        if prev is not None and s.device_id == prev.device_id:
            if s.timestamp <= prev.timestamp:
                raise OrderingError(
                    f"samples not strictly increasing in time for device {s.device_id!r} "
                    f"at timestamp {s.timestamp}"
                )
        elif s.device_id in seen or (prev is not None and s.device_id < prev.device_id):
            raise OrderingError(f"samples not sorted by device_id at {s.device_id!r}")
        seen.add(s.device_id)
        prev = s


def extract_features(samples: Sequence[Sample], config: WindowConfig = WindowConfig(),
                     n_jobs: int = 1) -> FeatureTable:
    """Window every device stream and compute base features (no lags).

    Each device yields ``(N - window_length) // step_length + 1`` rows per
    contiguous segment; rows come out ordered by (device_id, timestamp_max)
    whatever `n_jobs` is.
    """
    samples = list(samples)
    _check_order(samples)
    columns = base_feature_names(config.wavelet_levels)
    jobs = []
    for dev, group in groupby(samples, key=lambda s: s.device_id):
        group = list(group)
        if len(group) < config.window_length:
            log.warning("device %s has %d samples, fewer than window_length %d; no rows",
                        dev, len(group), config.window_length)
            continue
        _, ts, xyz, labels = samples_to_arrays(group)
        jobs.append((dev, ts, xyz, labels, config))
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_device_rows, jobs))
    else:
        results = [_device_rows(j) for j in jobs]
    rows = [r for res in results for r in res[0]]
    metas = [m for res in results for m in res[1]]
    if not rows:
        if samples:
            log.warning("no complete windows; returning an empty table")
        return FeatureTable.empty(columns)
    dev, ts, lab, deg = zip(*metas)
    return FeatureTable(columns, np.vstack(rows), dev, ts, lab, deg)


def add_lag_features(table: FeatureTable, max_lag: int = 5) -> FeatureTable:
    """Append ``C_lag_k`` (value of C k rows earlier, same device) for k = 1..max_lag.

    Rows must be ordered by (device_id, timestamp_max). The first `max_lag`
    rows of each device have incomplete history and are dropped.
    """
    if max_lag < 1:
        raise ParameterError(f"max_lag must be >= 1, got {max_lag}")
    base = table.columns
    columns = base + [f"{c}_lag_{k}" for k in range(1, max_lag + 1) for c in base]
    if len(table) == 0:
        return FeatureTable.empty(columns)
    blocks, keep = [], []
    dev = table.device_id
    start = 0
    for end in list(np.flatnonzero(dev[1:] != dev[:-1]) + 1) + [len(table)]:
        if np.any(np.diff(table.timestamp_max[start:end]) <= 0):
            raise OrderingError(f"rows of device {dev[start]!r} not ordered by timestamp_max")
        n = end - start
        if n <= max_lag:
            log.warning("device %s has %d rows, not more than max_lag=%d; dropped",
                        dev[start], n, max_lag)
        else:
            v = table.values[start:end]
            parts = [v[max_lag:]] + [v[max_lag - k:n - k] for k in range(1, max_lag + 1)]
            blocks.append(np.hstack(parts))
            d = table.degenerate[start:end]
            flag = d[max_lag:].copy()
            for k in range(1, max_lag + 1):
                flag |= d[max_lag - k:n - k]
            keep.append((np.arange(start + max_lag, end), flag))
        start = end
    if not blocks:
        return FeatureTable.empty(columns)
    rows = np.concatenate([k[0] for k in keep])
    return FeatureTable(columns, np.vstack(blocks), table.device_id[rows],
                        table.timestamp_max[rows], table.label[rows],
                        np.concatenate([k[1] for k in keep]))


def build_feature_table(samples: Sequence[Sample], config: WindowConfig = WindowConfig(),
                        n_jobs: int = 1) -> FeatureTable:
    """Full extraction: base window features plus lags up to ``config.max_lag``."""
    table = extract_features(samples, config, n_jobs=n_jobs)
    if config.max_lag == 0:
        return table
    return add_lag_features(table, config.max_lag)
