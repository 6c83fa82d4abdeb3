"""Classifiers, metrics, model artifacts and grid search."""
from .artifact import (
    HYPERPARAMETERS,
    KINDS,
    ModelArtifact,
    ModelError,
    ModelSpec,
    fit_model,
    gbt_fit,
    knn_fit,
    knn_predict_proba,
    load_model,
    random_forest_fit,
    save_model,
    tree_fit,
)
from .boosting import GradientBoostingClassifier, softmax
from .forest import RandomForestClassifier
from .knn import KNNClassifier
from .metrics import (
    EvaluationError,
    Metrics,
    UndefinedAUCError,
    compute_metrics,
    confusion_matrix,
    roc_auc_ovr,
    roc_curve,
)
from .search import GridResult, StratificationError, grid_search, stratified_kfold
from .tree import DecisionTreeClassifier, GradientTree, gini, leaf_weight


def evaluate(model: ModelArtifact, table) -> Metrics:
    """Score a fitted model on a labelled table."""
    if any(lbl is None for lbl in table.label):
        raise EvaluationError("cannot evaluate on unlabeled rows")
    if len(table) == 0:
        raise EvaluationError("cannot evaluate on an empty table")
    unknown = sorted(set(table.label) - set(model.classes))
    if unknown:
        raise EvaluationError(f"labels not in the model vocabulary: {unknown}")
    y = model.encode(table.label)
    return compute_metrics(y, model.predict_proba(table), model.classes)


__all__ = [
    "DecisionTreeClassifier", "EvaluationError", "GradientBoostingClassifier", "GradientTree",
    "GridResult", "HYPERPARAMETERS", "KINDS", "KNNClassifier", "Metrics", "ModelArtifact",
    "ModelError", "ModelSpec", "RandomForestClassifier", "StratificationError",
    "UndefinedAUCError", "compute_metrics", "confusion_matrix", "evaluate", "fit_model",
    "gbt_fit", "gini", "grid_search", "knn_fit", "knn_predict_proba", "leaf_weight",
    "load_model", "random_forest_fit", "roc_auc_ovr", "roc_curve", "save_model",
    "softmax", "stratified_kfold", "tree_fit",
]
