"""Stratified k-fold cross-validation and exhaustive grid search."""
from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..table import FeatureTable
from .artifact import ModelSpec, fit_arrays, class_vocabulary
from .metrics import Metrics, compute_metrics

METRIC_NAMES = ("accuracy", "precision", "recall", "f1")


class StratificationError(ValueError):
    pass


def stratified_kfold(labels, n_folds: int = 5, seed: int = 0) -> list[np.ndarray]:
    """Held-out row indices for each fold, every class present in every fold.

    Each class's rows are shuffled and dealt round-robin; the dealing
    position carries over between classes so fold sizes differ by at most 1.
    """
    if n_folds < 2:
        raise StratificationError("need at least 2 folds")
    labels = np.asarray(labels, dtype=object)
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    offset = 0
    for cls in class_vocabulary(labels):
        rows = np.flatnonzero(labels == cls)
        if rows.size < n_folds:
            raise StratificationError(
                f"class {cls!r} has {rows.size} rows, fewer than {n_folds} folds"
            )
        for i, r in enumerate(rng.permutation(rows)):
            folds[(offset + i) % n_folds].append(int(r))
        offset += rows.size
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]


def expand_grid(grid: dict[str, list]) -> list[dict]:
    """Cartesian product of a name -> values grid, in key then value order."""
    if not grid:
        return [{}]
    names = list(grid)
    return [dict(zip(names, combo)) for combo in itertools.product(*(grid[n] for n in names))]


@dataclass
class GridResult:
    spec: ModelSpec
    folds: list[Metrics] = field(default_factory=list)

    def values(self, name: str) -> np.ndarray:
        return np.array([m.as_dict()[name] for m in self.folds], dtype=float)

    def mean(self, name: str) -> float:
        return float(self.values(name).mean())

    def std(self, name: str) -> float:
        # population std over folds
        return float(self.values(name).std())

    def sort_key(self):
        params = tuple(sorted((k, repr(v)) for k, v in self.spec.hyperparameters.items()))
        ident = (self.spec.kind, self.spec.window_length or 0, self.spec.step_length or 0, params)
        return (-self.mean("f1"), -self.mean("accuracy"), repr(ident))


def cross_validate(spec: ModelSpec, table: FeatureTable, n_folds: int = 5,
                   seed: int = 0) -> list[Metrics]:
    labels = table.labels()
    classes = class_vocabulary(labels)
    index = {c: i for i, c in enumerate(classes)}
    y = np.array([index[c] for c in labels])
    out = []
    for held in stratified_kfold(labels, n_folds, seed):
        keep = np.ones(len(table), dtype=bool)
        keep[held] = False
        model = fit_arrays(spec, table.values[keep], labels[keep], table.columns, seed, classes)
        out.append(compute_metrics(y[held], model.predict_proba(table.values[held]), classes))
    return out


def _run(job) -> GridResult:
    spec, table, n_folds, seed = job
    return GridResult(spec, cross_validate(spec, table, n_folds, seed))


def grid_search(kind: str, grid: dict[str, list], train, n_folds: int = 5, seed: int = 0,
                n_jobs: int = 1) -> tuple[ModelSpec, list[GridResult]]:
    """Score every grid point by k-fold CV and return (best spec, all results).

    `train` is either one FeatureTable or a mapping ``(window, step) ->
    FeatureTable`` whose keys are the window variants to search; each
    variant's table must already be extracted with that window. Results
    follow grid order (windows outermost). Best is the highest mean F1,
    then mean accuracy, then the smallest parameter tuple.
    """
    tables = train if isinstance(train, dict) else {(None, None): train}
    jobs = []
    for (window, step), table in tables.items():
        for params in expand_grid(grid):
            jobs.append((ModelSpec(kind, params, window, step), table, n_folds, seed))
    results = search_jobs(jobs, n_jobs)
    return best_result(results).spec, results


def search_jobs(jobs, n_jobs: int = 1) -> list[GridResult]:
    if not jobs:
        raise ValueError("empty grid")
    if n_jobs == 1:
        return [_run(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(_run, jobs))


def best_result(results: list[GridResult]) -> GridResult:
    return min(results, key=GridResult.sort_key)


def format_mean_std(mean: float, std: float) -> str:
    return f"{mean:.3f} ± {std:.4f}"
