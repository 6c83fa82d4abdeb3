"""Shapley-value attribution with an interventional value function.

For a coalition S, ``v(S)`` is the model output for the target class
averaged over background rows whose S-features are overwritten with the
instance's values. Three estimators share that game:

* :func:`shapley_exact` enumerates all ``2**F`` coalitions;
* :func:`shapley_sampled` averages marginal contributions along random
  feature orderings;
* :func:`shapley_retrain` refits a model per coalition instead of
  intervening, for tiny feature counts only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..models.artifact import ModelArtifact
from ..models.knn import KNNClassifier

EXACT_CAP = 20


class EnumerationError(ValueError):
    """Too many features for exact enumeration."""


class ParameterError(ValueError):
    pass


@dataclass
class PhiVector:
    values: np.ndarray
    base_value: float
    output: float
    feature_names: list[str] = field(default_factory=list)
    target_class: object = None

    @property
    def efficiency_gap(self) -> float:
        return float(self.base_value + self.values.sum() - self.output)

    def ranked(self) -> list[tuple[str, float]]:
        order = np.argsort(-np.abs(self.values), kind="stable")
        return [(self.feature_names[i], float(self.values[i])) for i in order]


class _Game:
    """Wraps a model into ``f(rows) -> target-class output``."""

    def __init__(self, model, target_class=None):
        self.model = model
        self.knn = None
        if isinstance(model, ModelArtifact):
            self.column = model.class_index(target_class) if target_class is not None else None
            self.predict = model.predict_proba
            if isinstance(model.estimator, KNNClassifier):
                self.knn = model.estimator
        elif hasattr(model, "predict_proba"):
            self.column = target_class
            self.predict = model.predict_proba
        elif callable(model):
            self.column = target_class
            self.predict = model
        else:
            raise TypeError(f"cannot explain a {type(model).__name__}")

    def __call__(self, rows: np.ndarray) -> np.ndarray:
        out = np.asarray(self.predict(rows), dtype=float)
        if out.ndim == 2:
            if self.column is None:
                raise ParameterError("target_class is required for multi-output models")
            out = out[:, self.column]
        return out


def _prepare(instance, background):
    x = np.asarray(instance, dtype=float).ravel()
    bg = np.asarray(background, dtype=float)
    if bg.ndim == 1:
        bg = bg[None, :]
    if bg.shape[1] != x.size:
        raise ParameterError(f"background has {bg.shape[1]} features, instance has {x.size}")
    if bg.shape[0] == 0:
        raise ParameterError("background sample is empty")
    return x, bg


def _names(model, n: int, feature_names) -> list[str]:
    if feature_names is not None:
        return list(feature_names)
    if isinstance(model, ModelArtifact):
        return list(model.feature_names)
    return [f"f{i}" for i in range(n)]


def coalition_weights(n_features: int) -> np.ndarray:
    """``|S|! (F - |S| - 1)! / F!`` indexed by coalition size ``|S|``."""
    f = n_features
    return np.array([math.factorial(s) * math.factorial(f - s - 1) / math.factorial(f)
                     for s in range(f)])


def coalition_values(game: Callable, x: np.ndarray, bg: np.ndarray,
                     chunk_rows: int = 200_000) -> np.ndarray:
    """``v(S)`` for every bitmask S (bit i set: feature i from the instance)."""
    f = x.size
    masks = np.arange(1 << f, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(f)) & 1).astype(bool)
    values = np.empty(masks.size)
    per = max(1, chunk_rows // bg.shape[0])
    for start in range(0, masks.size, per):
        sel = bits[start:start + per]
        hybrid = np.where(sel[:, None, :], x[None, None, :], bg[None, :, :])
        out = game(hybrid.reshape(-1, f)).reshape(sel.shape[0], bg.shape[0])
        values[start:start + per] = out.mean(axis=1)
    return values


def shapley_exact(model, instance, background, target_class=None, feature_names=None,
                  cap: int = EXACT_CAP) -> PhiVector:
    """Exact Shapley values by enumerating every coalition."""
    x, bg = _prepare(instance, background)
    f = x.size
    if f > cap:
        raise EnumerationError(
            f"{f} features exceed the exact enumeration cap of {cap}; use shapley_sampled"
        )
    game = _Game(model, target_class)
    v = coalition_values(game, x, bg)
    weights = coalition_weights(f)
    masks = np.arange(1 << f, dtype=np.int64)
    sizes = np.array([bin(m).count("1") for m in range(1 << f)])
    phi = np.empty(f)
    for i in range(f):
        without = masks[(masks >> i) & 1 == 0]
        phi[i] = np.dot(weights[sizes[without]], v[without | (1 << i)] - v[without])
    return PhiVector(phi, float(v[0]), float(v[-1]), _names(model, f, feature_names),
                     target_class)


def _knn_paths(knn: KNNClassifier, column: int, x, bg, orders) -> np.ndarray:
    """Target-class outputs along each insertion path, averaged over background."""
    paths = np.zeros((len(orders), x.size + 1))
    for p, order in enumerate(orders):
        for b in bg:
            paths[p] += knn.predict_proba_path(x, b, order)[:, column]
    return paths / bg.shape[0]


def _generic_paths(game: _Game, x, bg, orders, chunk_elements: int) -> np.ndarray:
    f = x.size
    n_points = len(orders) * (f + 1)
    # rank[p, j]: position of feature j in ordering p
    rank = np.argsort(orders, axis=1)
    flat = np.empty(n_points)
    per = max(1, chunk_elements // (bg.shape[0] * f))
    for start in range(0, n_points, per):
        point = np.arange(start, min(start + per, n_points))
        path, step = np.divmod(point, f + 1)
        take = rank[path] < step[:, None]
        hybrid = np.where(take[:, None, :], x, bg[None, :, :])
        flat[point] = game(hybrid.reshape(-1, f)).reshape(point.size, bg.shape[0]).mean(axis=1)
    return flat.reshape(len(orders), f + 1)


def shapley_sampled(model, instance, background, target_class=None, n_permutations: int = 100,
                    seed: int | np.random.SeedSequence = 0, feature_names=None,
                    chunk_elements: int = 5_000_000) -> PhiVector:
    """Permutation-sampling estimate of the same Shapley values.

    Each sampled ordering adds features one at a time; a feature's
    contribution is the change in ``v`` when it joins. The estimate is the
    mean contribution over orderings.
    """
    if n_permutations < 1:
        raise ParameterError("n_permutations must be >= 1")
    x, bg = _prepare(instance, background)
    f = x.size
    rng = np.random.default_rng(seed)
    orders = np.array([rng.permutation(f) for _ in range(n_permutations)])
    game = _Game(model, target_class)
    if game.knn is not None and game.column is not None:
        paths = _knn_paths(game.knn, game.column, x, bg, orders)
    else:
        paths = _generic_paths(game, x, bg, orders, chunk_elements)
    steps = np.diff(paths, axis=1)
    phi = np.zeros(f)
    np.add.at(phi, orders, steps)
    phi /= n_permutations
    return PhiVector(phi, float(paths[0, 0]), float(paths[0, -1]),
                     _names(model, f, feature_names), target_class)


def shapley_retrain(fit: Callable, X_train, y_train, instance, max_features: int = 6,
                    feature_names: Sequence[str] | None = None) -> PhiVector:
    """Shapley values where each coalition gets its own retrained model.

    ``fit(X_subset, y)`` must return a callable mapping rows of the subset
    features to outputs. The empty coalition's value is ``mean(y)``.
    """
    X_train = np.asarray(X_train, dtype=float)
    y_train = np.asarray(y_train, dtype=float)
    x = np.asarray(instance, dtype=float).ravel()
    f = x.size
    if f > max_features:
        raise EnumerationError(f"retraining mode supports at most {max_features} features")
    v = np.empty(1 << f)
    v[0] = y_train.mean()
    for m in range(1, 1 << f):
        cols = [i for i in range(f) if m >> i & 1]
        predictor = fit(X_train[:, cols], y_train)
        v[m] = float(np.asarray(predictor(x[cols][None, :])).ravel()[0])
    weights = coalition_weights(f)
    phi = np.zeros(f)
    for m in range(1 << f):
        size = bin(m).count("1")
        for i in range(f):
            if not m >> i & 1:
                phi[i] += weights[size] * (v[m | 1 << i] - v[m])
    names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(f)]
    return PhiVector(phi, float(v[0]), float(v[-1]), names)
