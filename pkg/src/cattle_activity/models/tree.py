"""CART decision trees: Gini classification trees and gradient/hessian trees."""
from __future__ import annotations

import numpy as np

LEAF = -1


class _Nodes:
    """Flat node arrays shared by both tree kinds."""

    def __init__(self, value_width: int):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[np.ndarray] = []
        self.width = value_width

    def add(self, value) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(np.asarray(value, dtype=float).reshape(self.width))
        return len(self.feature) - 1

    def freeze(self) -> dict[str, np.ndarray]:
        return {
            "feature": np.array(self.feature, dtype=np.int64),
            "threshold": np.array(self.threshold, dtype=float),
            "left": np.array(self.left, dtype=np.int64),
            "right": np.array(self.right, dtype=np.int64),
            "value": np.vstack(self.value) if self.value else np.empty((0, self.width)),
        }


def apply_tree(state: dict[str, np.ndarray], X: np.ndarray) -> np.ndarray:
    """Leaf index reached by each row of `X`; ``x <= threshold`` goes left."""
    node = np.zeros(X.shape[0], dtype=np.int64)
    feature, threshold = state["feature"], state["threshold"]
    left, right = state["left"], state["right"]
    active = np.flatnonzero(feature[node] != LEAF)
    while active.size:
        n = node[active]
        go_left = X[active, feature[n]] <= threshold[n]
        node[active] = np.where(go_left, left[n], right[n])
        active = active[feature[node[active]] != LEAF]
    return node


def _midpoint(a: float, b: float) -> float:
    t = (a + b) / 2.0
    return a if t == b else t


def gini(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - np.dot(p, p))


class DecisionTreeClassifier:
    """CART classifier minimising weighted Gini impurity.

    Candidate thresholds are midpoints between consecutive distinct values
    of a feature. A node is split only if the best split strictly lowers
    impurity. Leaves store the class distribution of their training rows.
    """

    def __init__(self, max_depth: int | None = None, min_samples_split: int = 2,
                 min_samples_leaf: int = 1, max_features: int | None = None,
                 random_state: np.random.Generator | int | None = None):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.random_state = random_state

    def fit(self, X, y, n_classes: int | None = None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=np.int64)
        if X.shape[0] == 0:
            raise ValueError("cannot fit a tree on an empty table")
        self.n_classes_ = int(n_classes if n_classes is not None else y.max() + 1)
        self.n_features_ = X.shape[1]
        rng = np.random.default_rng(self.random_state)
        onehot = np.eye(self.n_classes_)[y]
        nodes = _Nodes(self.n_classes_)
        root = nodes.add(onehot.sum(axis=0) / len(y))
        stack = [(root, np.arange(len(y)), 0)]
        while stack:
            node, idx, depth = stack.pop()
            counts = onehot[idx].sum(axis=0)
            if (len(idx) < self.min_samples_split
                    or (self.max_depth is not None and depth >= self.max_depth)
                    or np.count_nonzero(counts) <= 1):
                continue
            if self.max_features is None or self.max_features >= self.n_features_:
                candidates = np.arange(self.n_features_)
            else:
                candidates = rng.choice(self.n_features_, self.max_features, replace=False)
            split = self._best_split(X, onehot, idx, candidates, gini(counts))
            if split is None:
                continue
            f, thr = split
            mask = X[idx, f] <= thr
            li, ri = idx[mask], idx[~mask]
            nodes.feature[node] = int(f)
            nodes.threshold[node] = thr
            nodes.left[node] = nodes.add(onehot[li].sum(axis=0) / len(li))
            nodes.right[node] = nodes.add(onehot[ri].sum(axis=0) / len(ri))
            stack.append((nodes.right[node], ri, depth + 1))
            stack.append((nodes.left[node], li, depth + 1))
        self.tree_ = nodes.freeze()
        return self

    def _best_split(self, X, onehot, idx, candidates, parent_impurity):
        n = len(idx)
        leaf = self.min_samples_leaf
        best_score, best = parent_impurity - 1e-12, None
        n_left = np.arange(1, n, dtype=float)
        n_right = n - n_left
        for f in candidates:
            xs = X[idx, f]
            order = np.argsort(xs, kind="stable")
            xs = xs[order]
            cum = np.cumsum(onehot[idx[order]], axis=0)
            right = cum[-1] - cum[:-1]
            cum = cum[:-1]
            gl = 1.0 - np.einsum("ij,ij->i", cum, cum) / n_left ** 2
            gr = 1.0 - np.einsum("ij,ij->i", right, right) / n_right ** 2
            score = (n_left * gl + n_right * gr) / n
            valid = xs[:-1] < xs[1:]
            if leaf > 1:
                valid &= (n_left >= leaf) & (n_right >= leaf)
            if not valid.any():
                continue
            score = np.where(valid, score, np.inf)
            i = int(np.argmin(score))
            if score[i] < best_score:
                best_score, best = score[i], (int(f), _midpoint(xs[i], xs[i + 1]))
        return best

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return self.tree_["value"][apply_tree(self.tree_, X)]

    @property
    def depth(self) -> int:
        left, right = self.tree_["left"], self.tree_["right"]
        depth = np.zeros(len(left), dtype=np.int64)
        for i in range(len(left)):
            if left[i] != LEAF:
                depth[left[i]] = depth[right[i]] = depth[i] + 1
        return int(depth.max())


def soft_threshold(g, alpha):
    return np.sign(g) * np.maximum(np.abs(g) - alpha, 0.0)


def leaf_weight(G, H, alpha=0.0, lam=0.0):
    """Optimal leaf output under L1 (`alpha`) and L2 (`lam`) penalties.

    ``w = -sign(G) * max(|G| - alpha, 0) / (H + lam)``; zero whenever
    ``alpha >= |G|``.
    """
    return -soft_threshold(G, alpha) / (np.asarray(H, dtype=float) + lam)


class GradientTree:
    """Regression tree fitted to per-row gradient and hessian statistics."""

    def __init__(self, max_depth: int = 6, reg_alpha: float = 0.0, reg_lambda: float = 1.0,
                 min_child_weight: float = 1.0, min_split_gain: float = 0.0):
        self.max_depth = max_depth
        self.reg_alpha = reg_alpha
        self.reg_lambda = reg_lambda
        self.min_child_weight = min_child_weight
        self.min_split_gain = min_split_gain

    def _score(self, G, H):
        t = np.abs(G)
        if self.reg_alpha:
            t = np.maximum(t - self.reg_alpha, 0.0)
        return t * t / (H + self.reg_lambda)

    def fit(self, X, grad, hess, order=None):
        """`order` optionally holds a precomputed per-feature argsort of X."""
        X = np.asarray(X, dtype=float)
        if order is None:
            order = np.argsort(X, axis=0, kind="stable")
        n_feat = X.shape[1]
        nodes = _Nodes(1)
        root = nodes.add([leaf_weight(grad.sum(), hess.sum(), self.reg_alpha, self.reg_lambda)])
        # each frontier entry keeps its rows sorted separately per feature:
        # (node, rows[F, m], values[F, m]); splitting is a stable partition
        rows = np.ascontiguousarray(order.T)
        frontier = [(root, rows, X[rows, np.arange(n_feat)[:, None]])]
        for _ in range(self.max_depth):
            next_frontier = []
            for node, rows, xs in frontier:
                if rows.shape[1] < 2:
                    continue
                split = self._best_split(xs, grad[rows], hess[rows])
                if split is None:
                    continue
                f, thr = split
                go_left = np.zeros(X.shape[0], dtype=bool)
                go_left[rows[f][xs[f] <= thr]] = True
                nodes.feature[node] = f
                nodes.threshold[node] = thr
                left_mask = go_left[rows]
                for side, mask in (("left", left_mask), ("right", ~left_mask)):
                    m = int(np.count_nonzero(mask[0]))
                    r = rows[mask].reshape(n_feat, m)
                    child = nodes.add([leaf_weight(grad[r[0]].sum(), hess[r[0]].sum(),
                                                   self.reg_alpha, self.reg_lambda)])
                    getattr(nodes, side)[node] = child
                    next_frontier.append((child, r, xs[mask].reshape(n_feat, m)))
            frontier = next_frontier
            if not frontier:
                break
        self.tree_ = nodes.freeze()
        return self

    def _best_split(self, xs, g, h):
        """Best (feature, threshold) given per-feature sorted values and stats."""
        G, H = g[0].sum(), h[0].sum()
        parent = self._score(G, H)
        gl = np.cumsum(g, axis=1)[:, :-1]
        hl = np.cumsum(h, axis=1)[:, :-1]
        gr, hr = G - gl, H - hl
        valid = (xs[:, :-1] < xs[:, 1:]) & (hl >= self.min_child_weight) & (hr >= self.min_child_weight)
        if not valid.any():
            return None
        gain = 0.5 * (self._score(gl, hl) + self._score(gr, hr) - parent)
        gain = np.where(valid, gain, -np.inf)
        f, i = np.unravel_index(int(np.argmax(gain)), gain.shape)
        if not gain[f, i] > self.min_split_gain:
            return None
        return int(f), _midpoint(xs[f, i], xs[f, i + 1])

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return self.tree_["value"][apply_tree(self.tree_, X), 0]
