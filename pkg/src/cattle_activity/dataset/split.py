"""Class-stratified train / validation / test partition of a FeatureTable."""
from __future__ import annotations

import numpy as np

from ..table import FeatureTable


class SplitError(ValueError):
    pass


def _split_counts(n: int, ratios) -> tuple[int, int, int]:
    n_val = max(1, int(round(n * ratios[1])))
    n_test = max(1, int(round(n * ratios[2])))
    return n - n_val - n_test, n_val, n_test


def split_indices(labels, ratios=(0.6, 0.2, 0.2), seed: int = 0):
    """Index arrays (train, validation, test), each sorted ascending."""
    if len(ratios) != 3 or any(r < 0 for r in ratios) or not np.isclose(sum(ratios), 1.0):
        raise SplitError(f"ratios must be three non-negative numbers summing to 1, got {ratios}")
    labels = np.asarray(labels, dtype=object)
    rng = np.random.default_rng(seed)
    parts = ([], [], [])
    for cls in sorted(set(labels)):
        idx = np.flatnonzero(labels == cls)
        if idx.size < 3:
            raise SplitError(f"class {cls!r} has {idx.size} rows; at least 3 are needed")
        idx = rng.permutation(idx)
        n_train, n_val, _ = _split_counts(idx.size, ratios)
        parts[0].append(idx[:n_train])
        parts[1].append(idx[n_train:n_train + n_val])
        parts[2].append(idx[n_train + n_val:])
    return tuple(np.sort(np.concatenate(p)) for p in parts)


def group_split_indices(groups, ratios=(0.6, 0.2, 0.2), seed: int = 0):
    """Assign whole groups (devices) to splits, approximating `ratios` by rows."""
    groups = np.asarray(groups, dtype=object)
    names = sorted(set(groups))
    if len(names) < 3:
        raise SplitError(f"group split needs at least 3 devices, got {len(names)}")
    rng = np.random.default_rng(seed)
    order = [names[i] for i in rng.permutation(len(names))]
    sizes = np.array([np.sum(groups == g) for g in order], dtype=float)
    bounds = np.cumsum(ratios)[:2] * sizes.sum()
    centers = np.cumsum(sizes) - sizes / 2
    which = np.searchsorted(bounds, centers, side="right")
    # every split gets at least one device
    which[0], which[-1] = 0, 2
    if 1 not in which:
        which[-2] = 1
    parts = [np.flatnonzero(np.isin(groups, [g for g, w in zip(order, which) if w == k]))
             for k in range(3)]
    return tuple(parts)


def stratified_split(table: FeatureTable, ratios=(0.6, 0.2, 0.2), seed: int = 0,
                     group_by_device: bool = False):
    """Disjoint, exhaustive (train, validation, test) tables, seed-deterministic.

    Per class, validation and test each get ``round(n * ratio)`` rows (at
    least one) and train the rest, so every split is within one row of the
    exact ratio. With `group_by_device`, devices are kept whole instead.
    """
    if group_by_device:
        idx = group_split_indices(table.device_id, ratios, seed)
    else:
        idx = split_indices(table.labels(), ratios, seed)
    return tuple(table.take(i) for i in idx)
