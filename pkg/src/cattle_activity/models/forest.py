"""Bagged random forest of Gini trees."""
from __future__ import annotations

import math

import numpy as np

from .tree import DecisionTreeClassifier


class RandomForestClassifier:
    """Bootstrap-aggregated CART trees with per-split feature subsampling.

    ``max_features="sqrt"`` draws ``floor(sqrt(F))`` candidate features at
    every split. Probabilities are the mean of the trees' leaf
    distributions. Each tree draws from its own child of
    ``SeedSequence(seed)``, so results depend only on the seed.
    """

    def __init__(self, n_estimators: int = 100, max_depth: int | None = None,
                 min_samples_split: int = 2, min_samples_leaf: int = 1,
                 max_features: int | str | None = "sqrt", bootstrap: bool = True,
                 seed: int = 0):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.seed = seed

    def _n_candidates(self, n_features: int) -> int | None:
        if self.max_features == "sqrt":
            return max(1, int(math.isqrt(n_features)))
        if self.max_features == "log2":
            return max(1, int(math.log2(n_features)))
        return self.max_features

    def fit(self, X, y, n_classes: int | None = None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=np.int64)
        self.n_classes_ = int(n_classes if n_classes is not None else y.max() + 1)
        m = self._n_candidates(X.shape[1])
        self.trees_ = []
        for child in np.random.SeedSequence(self.seed).spawn(self.n_estimators):
            rng = np.random.default_rng(child)
            rows = rng.integers(0, len(y), len(y)) if self.bootstrap else np.arange(len(y))
            tree = DecisionTreeClassifier(self.max_depth, self.min_samples_split,
                                          self.min_samples_leaf, m, rng)
            self.trees_.append(tree.fit(X[rows], y[rows], self.n_classes_))
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        total = np.zeros((X.shape[0], self.n_classes_))
        for tree in self.trees_:
            total += tree.predict_proba(X)
        return total / len(self.trees_)

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)
