"""Classification metrics: confusion counts, macro scores and one-vs-rest AUC."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata


class EvaluationError(ValueError):
    pass


class UndefinedAUCError(ValueError):
    pass


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    """Counts with true classes on rows and predictions on columns."""
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true), np.asarray(y_pred)), 1)
    return cm


def macro_scores(cm: np.ndarray) -> tuple[float, float, float]:
    """Macro precision, recall and F1 over classes seen in truth or predictions.

    A class with an empty denominator scores 0 for that measure.
    """
    cm = np.asarray(cm, dtype=float)
    tp = np.diag(cm)
    predicted = cm.sum(axis=0)
    actual = cm.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        recall = np.where(actual > 0, tp / actual, 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2 * precision * recall / denom, 0.0)
    seen = (predicted > 0) | (actual > 0)
    if not seen.any():
        return 0.0, 0.0, 0.0
    return float(precision[seen].mean()), float(recall[seen].mean()), float(f1[seen].mean())


def auc_binary(scores, positive) -> float:
    """Mann-Whitney AUC with mid-ranks for tied scores."""
    scores = np.asarray(scores, dtype=float)
    positive = np.asarray(positive, dtype=bool)
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError("AUC needs at least one positive and one negative")
    ranks = rankdata(scores, method="average")
    return float((ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_auc_ovr(scores, labels) -> float:
    """Macro one-vs-rest AUC over the classes present in `labels`.

    `scores` is ``(n, K)`` with column ``c`` scoring class index ``c``.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    present = np.unique(labels)
    if present.size < 2:
        raise UndefinedAUCError("one-vs-rest AUC is undefined for a single class")
    return float(np.mean([auc_binary(scores[:, c], labels == c) for c in present]))


def per_class_auc(scores, labels, n_classes: int) -> list[float | None]:
    labels = np.asarray(labels)
    out = []
    for c in range(n_classes):
        pos = labels == c
        out.append(auc_binary(scores[:, c], pos) if 0 < pos.sum() < pos.size else None)
    return out


def roc_curve(scores, positive) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(fpr, tpr, thresholds), one point per distinct score, highest first."""
    scores = np.asarray(scores, dtype=float)
    positive = np.asarray(positive, dtype=bool)
    order = np.argsort(-scores, kind="stable")
    s, pos = scores[order], positive[order]
    last = np.r_[np.flatnonzero(np.diff(s)), s.size - 1]
    tps = np.cumsum(pos)[last]
    fps = (last + 1) - tps
    tpr = np.r_[0.0, tps / max(1, pos.sum())]
    fpr = np.r_[0.0, fps / max(1, (~pos).sum())]
    return fpr, tpr, np.r_[np.inf, s[last]]


@dataclass
class Metrics:
    accuracy: float
    precision_macro: float
    recall_macro: float
    f1_macro: float
    auc_ovr_macro: float | None
    confusion: np.ndarray
    classes: list[str] = field(default_factory=list)

    def as_dict(self) -> dict[str, float | None]:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision_macro,
            "recall": self.recall_macro,
            "f1": self.f1_macro,
            "auc": self.auc_ovr_macro,
        }


def compute_metrics(y_true, proba, classes) -> Metrics:
    """Metrics from integer-coded truth and an ``(n, K)`` probability matrix."""
    y_true = np.asarray(y_true, dtype=np.int64)
    proba = np.asarray(proba, dtype=float)
    k = len(classes)
    y_pred = proba.argmax(axis=1)
    cm = confusion_matrix(y_true, y_pred, k)
    p, r, f1 = macro_scores(cm)
    try:
        auc = roc_auc_ovr(proba, y_true)
    except UndefinedAUCError:
        auc = None
    acc = float(np.trace(cm) / cm.sum()) if cm.sum() else 0.0
    return Metrics(acc, p, r, f1, auc, cm, list(classes))
