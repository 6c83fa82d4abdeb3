"""Shapley attribution, per-class summaries and KS feature stability."""
from .shapley import (
    EXACT_CAP,
    EnumerationError,
    PhiVector,
    coalition_weights,
    shapley_exact,
    shapley_retrain,
    shapley_sampled,
)
from .stability import (
    MODERATE,
    STABLE,
    UNSTABLE,
    StabilityEntry,
    StabilityThresholds,
    ks_statistic,
    stability_category,
    stability_report,
)
from .summary import AttributionConfig, SamplingError, ShapSummary, class_shap_summary

__all__ = [
    "AttributionConfig", "EXACT_CAP", "EnumerationError", "MODERATE", "PhiVector", "STABLE",
    "SamplingError", "ShapSummary", "StabilityEntry", "StabilityThresholds", "UNSTABLE",
    "class_shap_summary", "coalition_weights", "ks_statistic", "shapley_exact",
    "shapley_retrain", "shapley_sampled", "stability_category", "stability_report",
]
