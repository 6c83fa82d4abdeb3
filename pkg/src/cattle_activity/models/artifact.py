"""Model specs, fitted artifacts and their on-disk format.

An artifact file is a zip archive written with fixed timestamps so equal
models give equal bytes. It holds ``meta.json``::

    {"format": "cattle-activity-model", "version": 1,
     "spec": {"kind", "hyperparameters", "window_length", "step_length"},
     "classes": [...], "feature_names": [...], "estimator": {...scalars}}

plus one ``.npy`` member per estimator array (KNN training matrix, tree
node arrays ``t{i}_feature`` / ``r{round}_c{class}_value`` and so on).
"""
from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..dataset.labels import ALL_CODES
from ..table import FeatureTable, atomic_write
from .boosting import GradientBoostingClassifier
from .forest import RandomForestClassifier
from .knn import KNNClassifier
from .tree import DecisionTreeClassifier, GradientTree

FORMAT = "cattle-activity-model"
VERSION = 1

HYPERPARAMETERS = {
    "knn": {"n_neighbors": 3, "p": 1, "weights": "distance"},
    "random_forest": {"n_estimators": 100, "max_depth": None, "min_samples_split": 2,
                      "min_samples_leaf": 1, "max_features": "sqrt", "bootstrap": True},
    "gradient_boosting": {"learning_rate": 0.1, "max_depth": 7, "n_estimators": 100,
                          "reg_alpha": 0.0, "reg_lambda": 1.0, "min_child_weight": 1.0,
                          "colsample": 1.0},
}
KINDS = tuple(HYPERPARAMETERS)


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    hyperparameters: dict[str, Any] = field(default_factory=dict)
    window_length: int | None = None
    step_length: int | None = None

    def __post_init__(self):
        if self.kind not in HYPERPARAMETERS:
            raise ModelError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        unknown = set(self.hyperparameters) - set(HYPERPARAMETERS[self.kind])
        if unknown:
            raise ModelError(f"unknown {self.kind} hyperparameters: {sorted(unknown)}")

    def resolved(self) -> dict[str, Any]:
        return {**HYPERPARAMETERS[self.kind], **self.hyperparameters}

    def label(self) -> str:
        params = ", ".join(f"{k}: {v}" for k, v in sorted(self.hyperparameters.items()))
        return f"{self.kind} ({self.window_length}/{self.step_length}) {params}"

    def as_dict(self) -> dict:
        return {"kind": self.kind, "hyperparameters": dict(self.hyperparameters),
                "window_length": self.window_length, "step_length": self.step_length}


def class_vocabulary(labels) -> list[str]:
    """Distinct labels in fixed vocabulary order, unknown codes last."""
    rank = {c: i for i, c in enumerate(ALL_CODES)}
    return sorted(set(labels), key=lambda c: (rank.get(c, len(rank)), c))


@dataclass
class ModelArtifact:
    spec: ModelSpec
    estimator: Any
    classes: list[str]
    feature_names: list[str]

    def _matrix(self, X) -> np.ndarray:
        if isinstance(X, FeatureTable):
            X = X.select(self.feature_names).values
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != len(self.feature_names):
            raise ModelError(
                f"model expects {len(self.feature_names)} features, got {X.shape[1]}"
            )
        return X

    def predict_proba(self, X) -> np.ndarray:
        return self.estimator.predict_proba(self._matrix(X))

    def predict(self, X) -> np.ndarray:
        return np.asarray(self.classes, dtype=object)[self.predict_proba(X).argmax(axis=1)]

    def class_index(self, label) -> int:
        if isinstance(label, (int, np.integer)):
            return int(label)
        try:
            return self.classes.index(label)
        except ValueError:
            raise ModelError(f"class {label!r} not in model vocabulary {self.classes}") from None

    def encode(self, labels) -> np.ndarray:
        return np.array([self.class_index(lbl) for lbl in labels], dtype=np.int64)


def _build(kind: str, params: dict, seed: int):
    if kind == "knn":
        return KNNClassifier(params["n_neighbors"], params["p"], params["weights"])
    if kind == "random_forest":
        return RandomForestClassifier(params["n_estimators"], params["max_depth"],
                                      params["min_samples_split"], params["min_samples_leaf"],
                                      params["max_features"], params["bootstrap"], seed)
    return GradientBoostingClassifier(params["learning_rate"], params["max_depth"],
                                      params["n_estimators"], params["reg_alpha"],
                                      params["reg_lambda"], params["min_child_weight"],
                                      params["colsample"], seed)


def fit_arrays(spec: ModelSpec, X, y_labels, feature_names, seed: int = 0,
               classes=None) -> ModelArtifact:
    classes = list(classes) if classes is not None else class_vocabulary(y_labels)
    index = {c: i for i, c in enumerate(classes)}
    y = np.array([index[c] for c in y_labels], dtype=np.int64)
    est = _build(spec.kind, spec.resolved(), seed).fit(np.asarray(X, dtype=float), y, len(classes))
    return ModelArtifact(spec, est, classes, list(feature_names))


def fit_model(spec: ModelSpec, table: FeatureTable, seed: int = 0) -> ModelArtifact:
    if len(table) == 0:
        raise ModelError("cannot fit on an empty table")
    return fit_arrays(spec, table.values, table.labels(), table.columns, seed)


def knn_fit(table: FeatureTable, n_neighbors: int = 3, p: float = 1,
            weights: str = "distance") -> ModelArtifact:
    spec = ModelSpec("knn", {"n_neighbors": n_neighbors, "p": p, "weights": weights})
    return fit_model(spec, table)


def knn_predict_proba(model: ModelArtifact, row) -> np.ndarray:
    return model.predict_proba(row)[0]


def tree_fit(table: FeatureTable, max_depth: int | None = None,
             min_samples_split: int = 2) -> ModelArtifact:
    """Single CART tree over all features (a forest of one, no bootstrap)."""
    spec = ModelSpec("random_forest", {"n_estimators": 1, "max_depth": max_depth,
                                       "min_samples_split": min_samples_split,
                                       "max_features": None, "bootstrap": False})
    return fit_model(spec, table)


def random_forest_fit(table: FeatureTable, n_estimators: int = 100,
                      max_depth: int | None = None, min_samples_split: int = 2,
                      seed: int = 0, bootstrap: bool = True,
                      max_features="sqrt") -> ModelArtifact:
    spec = ModelSpec("random_forest", {"n_estimators": n_estimators, "max_depth": max_depth,
                                       "min_samples_split": min_samples_split,
                                       "max_features": max_features, "bootstrap": bootstrap})
    return fit_model(spec, table, seed)


def gbt_fit(table: FeatureTable, learning_rate: float = 0.1, max_depth: int = 7,
            n_estimators: int = 200, reg_alpha: float = 0.0, reg_lambda: float = 1.0,
            seed: int = 0) -> ModelArtifact:
    spec = ModelSpec("gradient_boosting", {"learning_rate": learning_rate,
                                           "max_depth": max_depth,
                                           "n_estimators": n_estimators,
                                           "reg_alpha": reg_alpha, "reg_lambda": reg_lambda})
    return fit_model(spec, table, seed)


# -- serialisation -----------------------------------------------------------

def _estimator_state(est) -> tuple[dict, dict[str, np.ndarray]]:
    if isinstance(est, KNNClassifier):
        return ({"type": "knn", "n_classes": est.n_classes_},
                {"X": est.X_, "y": est.y_, "mean": est.mean_, "scale": est.scale_})
    if isinstance(est, RandomForestClassifier):
        arrays = {f"t{i}_{k}": v for i, t in enumerate(est.trees_) for k, v in t.tree_.items()}
        return {"type": "random_forest", "n_classes": est.n_classes_,
                "n_trees": len(est.trees_)}, arrays
    if isinstance(est, GradientBoostingClassifier):
        arrays = {f"r{r}_c{c}_{k}": v for r, trees in enumerate(est.rounds_)
                  for c, t in enumerate(trees) for k, v in t.tree_.items()}
        return {"type": "gradient_boosting", "n_classes": est.n_classes_,
                "n_rounds": len(est.rounds_)}, arrays
    raise ModelError(f"cannot serialise {type(est).__name__}")


_TREE_KEYS = ("feature", "threshold", "left", "right", "value")


def _restore(spec: ModelSpec, meta: dict, arrays: dict[str, np.ndarray]):
    params = spec.resolved()
    est = _build(spec.kind, params, 0)
    if meta["type"] == "knn":
        est.n_classes_ = meta["n_classes"]
        est.X_, est.y_, est.mean_, est.scale_ = (arrays[k] for k in ("X", "y", "mean", "scale"))
    elif meta["type"] == "random_forest":
        est.n_classes_ = meta["n_classes"]
        est.trees_ = []
        for i in range(meta["n_trees"]):
            t = DecisionTreeClassifier()
            t.n_classes_ = meta["n_classes"]
            t.tree_ = {k: arrays[f"t{i}_{k}"] for k in _TREE_KEYS}
            est.trees_.append(t)
    else:
        est.n_classes_ = meta["n_classes"]
        est.rounds_ = []
        for r in range(meta["n_rounds"]):
            trees = []
            for c in range(meta["n_classes"]):
                t = GradientTree()
                t.tree_ = {k: arrays[f"r{r}_c{c}_{k}"] for k in _TREE_KEYS}
                trees.append(t)
            est.rounds_.append(trees)
    return est


def _zip_member(zf: zipfile.ZipFile, name: str, data: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    zf.writestr(info, data)


def save_model(path, model: ModelArtifact, extra: dict | None = None) -> None:
    est_meta, arrays = _estimator_state(model.estimator)
    meta = {"format": FORMAT, "version": VERSION, "spec": model.spec.as_dict(),
            "classes": model.classes, "feature_names": model.feature_names,
            "estimator": est_meta, "extra": extra or {}}
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        _zip_member(zf, "meta.json", json.dumps(meta, sort_keys=True, indent=1).encode())
        for name in sorted(arrays):
            arr = io.BytesIO()
            np.lib.format.write_array(arr, np.ascontiguousarray(arrays[name]), allow_pickle=False)
            _zip_member(zf, f"{name}.npy", arr.getvalue())
    with atomic_write(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_model(path) -> tuple[ModelArtifact, dict]:
    """Return the artifact and the ``extra`` metadata stored with it."""
    path = Path(path)
    with zipfile.ZipFile(path) as zf:
        meta = json.loads(zf.read("meta.json"))
        if meta.get("format") != FORMAT:
            raise ModelError(f"{path}: not a model artifact")
        if meta.get("version") != VERSION:
            raise ModelError(f"{path}: unsupported model format version {meta.get('version')}")
        arrays = {n[:-4]: np.lib.format.read_array(io.BytesIO(zf.read(n)), allow_pickle=False)
                  for n in zf.namelist() if n.endswith(".npy")}
    spec = ModelSpec(**meta["spec"])
    est = _restore(spec, meta["estimator"], arrays)
    return ModelArtifact(spec, est, meta["classes"], meta["feature_names"]), meta["extra"]
