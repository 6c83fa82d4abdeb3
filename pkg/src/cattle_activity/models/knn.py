"""Minkowski k-nearest-neighbour classifier with inverse-distance voting."""
from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist


class ParameterError(ValueError):
    pass


class KNNClassifier:
    """k-NN on z-scored features (statistics from the training rows).

    With ``weights="distance"`` each of the k neighbours votes ``1/d``; if
    any of them sits at distance zero, only the zero-distance neighbours
    vote, so a query equal to a training row gets that row's class with
    probability 1.
    """

    def __init__(self, n_neighbors: int = 3, p: float = 1, weights: str = "distance",
                 standardize: bool = True):
        if weights not in ("distance", "uniform"):
            raise ParameterError(f"weights must be 'distance' or 'uniform', got {weights!r}")
        if p <= 0:
            raise ParameterError(f"Minkowski exponent must be positive, got {p}")
        if n_neighbors < 1:
            raise ParameterError("n_neighbors must be >= 1")
        self.n_neighbors = n_neighbors
        self.p = p
        self.weights = weights
        self.standardize = standardize

    def fit(self, X, y, n_classes: int | None = None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=np.int64)
        if self.n_neighbors > X.shape[0]:
            raise ParameterError(
                f"n_neighbors={self.n_neighbors} exceeds the {X.shape[0]} training rows"
            )
        self.n_classes_ = int(n_classes if n_classes is not None else y.max() + 1)
        if self.standardize:
            self.mean_ = X.mean(axis=0)
            scale = X.std(axis=0)
            self.scale_ = np.where(scale > 0, scale, 1.0)
        else:
            self.mean_ = np.zeros(X.shape[1])
            self.scale_ = np.ones(X.shape[1])
        self.X_ = (X - self.mean_) / self.scale_
        self.y_ = y
        return self

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean_) / self.scale_

    def _powered(self, diff: np.ndarray) -> np.ndarray:
        a = np.abs(diff)
        if self.p == 1:
            return a
        if self.p == 2:
            return a * a
        return a ** self.p

    def _root(self, s: np.ndarray) -> np.ndarray:
        if self.p == 1:
            return s
        return np.maximum(s, 0.0) ** (1.0 / self.p)

    def distances(self, Z: np.ndarray) -> np.ndarray:
        """Distances from standardised rows `Z` to every training row."""
        if self.p == 1:
            return cdist(Z, self.X_, "cityblock")
        if self.p == 2:
            return cdist(Z, self.X_, "euclidean")
        return cdist(Z, self.X_, "minkowski", p=self.p)

    def _vote(self, dist: np.ndarray) -> np.ndarray:
        k = self.n_neighbors
        if k < dist.shape[1]:
            nn = np.argpartition(dist, k - 1, axis=1)[:, :k]
        else:
            nn = np.broadcast_to(np.arange(dist.shape[1]), dist.shape).copy()
        d = np.take_along_axis(dist, nn, axis=1)
        if self.weights == "uniform":
            w = np.ones_like(d)
        else:
            exact = d == 0
            has_exact = exact.any(axis=1, keepdims=True)
            with np.errstate(divide="ignore"):
                w = np.where(has_exact, exact.astype(float), 1.0 / d)
        proba = np.zeros((dist.shape[0], self.n_classes_))
        np.add.at(proba, (np.arange(dist.shape[0])[:, None], self.y_[nn]), w)
        return proba / proba.sum(axis=1, keepdims=True)

    def predict_proba(self, X) -> np.ndarray:
        return self._vote(self.distances(self.transform(X)))

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)

    def predict_proba_path(self, instance, background, order) -> np.ndarray:
        """Class distributions along one feature-insertion path.

        Row ``m`` is the prediction for the hybrid that takes features
        ``order[:m]`` from `instance` and the rest from `background`
        (``m = 0 .. n_features``). Minkowski sums are additive over
        features, so all rows come from one cumulative sum.
        """
        x = self.transform(np.asarray(instance, dtype=float)[None, :])[0]
        b = self.transform(np.asarray(background, dtype=float)[None, :])[0]
        order = np.asarray(order)
        if getattr(self, "_columns", None) is None or self._columns.shape[1] != self.X_.shape[0]:
            self._columns = np.ascontiguousarray(self.X_.T)
        cols = self._columns[order]
        px = self._powered(x[order][:, None] - cols)
        pb = self._powered(b[order][:, None] - cols)
        sums = np.empty((len(order) + 1, cols.shape[1]))
        sums[0] = pb.sum(axis=0)
        step = px - pb
        # row-by-row running sum; much faster than cumsum over axis 0
        for i in range(len(order)):
            np.add(sums[i], step[i], out=sums[i + 1])
        # rows whose feature is unchanged add an exact zero, so their
        # distances stay bit-identical to the previous row
        return self._vote(self._root(np.maximum(sums, 0.0)))
