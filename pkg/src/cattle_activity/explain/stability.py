"""Two-sample Kolmogorov-Smirnov distance and feature-stability categories."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..table import FeatureTable, SchemaError

STABLE = "Stable"
MODERATE = "Moderate Stability"
UNSTABLE = "Instability"


class ParameterError(ValueError):
    pass


def ks_statistic(sample_a, sample_b) -> float:
    """Largest gap between the two right-continuous empirical CDFs.

    Both CDFs are evaluated at every point of the pooled sample, which is
    where the supremum is attained.
    """
    a = np.sort(np.asarray(sample_a, dtype=float).ravel())
    b = np.sort(np.asarray(sample_b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ParameterError("KS statistic needs two non-empty samples")
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / a.size
    fb = np.searchsorted(b, pooled, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


@dataclass(frozen=True)
class StabilityThresholds:
    """``D < moderate`` is Stable, ``D <= unstable`` Moderate, above that Instability."""

    moderate: float = 0.2
    unstable: float = 0.45


def stability_category(d: float, thresholds: StabilityThresholds = StabilityThresholds()) -> str:
    if d < thresholds.moderate:
        return STABLE
    if d <= thresholds.unstable:
        return MODERATE
    return UNSTABLE


@dataclass(frozen=True)
class StabilityEntry:
    feature: str
    mean_abs_shap: float
    ks_statistic: float
    category: str

    @property
    def extrapolated(self) -> bool:
        # no calibration example exists below the moderate threshold
        return self.category == STABLE


def stability_report(train_table: FeatureTable, test_table: FeatureTable,
                     features: Sequence[str], shap_scores: Mapping[str, float] | None = None,
                     thresholds: StabilityThresholds = StabilityThresholds()) -> list[StabilityEntry]:
    """KS distance between train and test marginals for each listed feature."""
    missing = [f for f in features if f not in train_table.columns or f not in test_table.columns]
    if missing:
        raise SchemaError(f"features missing from a table: {missing}")
    if len(train_table) == 0 or len(test_table) == 0:
        raise ParameterError("stability needs non-empty train and test tables")
    shap_scores = shap_scores or {}
    out = []
    for name in features:
        d = ks_statistic(train_table.column(name), test_table.column(name))
        out.append(StabilityEntry(name, float(shap_scores.get(name, 0.0)), d,
                                  stability_category(d, thresholds)))
    return out
