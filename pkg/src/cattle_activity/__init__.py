"""Activity recognition for livestock collar accelerometers.

Subpackages: ``dataset`` (ingestion, cleaning, labels, splits, synthetic
herds), ``models`` (classifiers, metrics, grid search) and ``explain``
(Shapley attribution, KS stability). ``signal`` and ``features`` hold the
per-window signal processing and the feature table builder.
"""
from .features import WindowConfig, build_feature_table, extract_features
from .table import FeatureTable

__version__ = "0.1.0"

__all__ = ["FeatureTable", "WindowConfig", "build_feature_table", "extract_features"]
