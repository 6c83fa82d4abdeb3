"""Multiclass gradient-boosted trees with L1/L2-regularised leaves."""
from __future__ import annotations

import numpy as np

from .tree import GradientTree, leaf_weight  # noqa: F401  (re-exported)


class ParameterError(ValueError):
    pass


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class GradientBoostingClassifier:
    """Softmax boosting: one gradient tree per class per round.

    Per row and class the loss gradient is ``p - y`` and the hessian
    ``p (1 - p)``. Leaf outputs come from :func:`leaf_weight` and are
    scaled by `learning_rate`. Raw scores start at zero.
    """

    def __init__(self, learning_rate: float = 0.1, max_depth: int = 7,
                 n_estimators: int = 100, reg_alpha: float = 0.0, reg_lambda: float = 1.0,
                 min_child_weight: float = 1.0, colsample: float = 1.0, seed: int = 0):
        if learning_rate <= 0:
            raise ParameterError(f"learning_rate must be positive, got {learning_rate}")
        if n_estimators < 1:
            raise ParameterError("n_estimators must be >= 1")
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.n_estimators = n_estimators
        self.reg_alpha = reg_alpha
        self.reg_lambda = reg_lambda
        self.min_child_weight = min_child_weight
        self.colsample = colsample
        self.seed = seed

    def fit(self, X, y, n_classes: int | None = None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=np.int64)
        k = self.n_classes_ = int(n_classes if n_classes is not None else y.max() + 1)
        n, n_feat = X.shape
        target = np.eye(k)[y]
        raw = np.zeros((n, k))
        order = np.argsort(X, axis=0, kind="stable")
        rng = np.random.default_rng(self.seed)
        n_cols = max(1, int(round(self.colsample * n_feat)))
        self.rounds_ = []
        for _ in range(self.n_estimators):
            p = softmax(raw)
            grad = p - target
            hess = np.maximum(p * (1.0 - p), 1e-16)
            cols = (np.sort(rng.choice(n_feat, n_cols, replace=False))
                    if n_cols < n_feat else np.arange(n_feat))
            trees = []
            for c in range(k):
                tree = GradientTree(self.max_depth, self.reg_alpha, self.reg_lambda,
                                    self.min_child_weight)
                tree.fit(X[:, cols], grad[:, c], hess[:, c], order[:, cols])
                tree.tree_["value"] = tree.tree_["value"] * self.learning_rate
                tree.tree_["feature"] = np.where(tree.tree_["feature"] >= 0,
                                                 cols[np.maximum(tree.tree_["feature"], 0)], -1)
                raw[:, c] += tree.predict(X)
                trees.append(tree)
            self.rounds_.append(trees)
        return self

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        raw = np.zeros((X.shape[0], self.n_classes_))
        for trees in self.rounds_:
            for c, tree in enumerate(trees):
                raw[:, c] += tree.predict(X)
        return raw

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)
