"""Per-class Shapley summaries over a seeded sample of instances."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..models.artifact import ModelArtifact, class_vocabulary
from ..table import FeatureTable
from .shapley import EXACT_CAP, PhiVector, shapley_exact, shapley_sampled

MODES = ("exact", "sampled")


class SamplingError(ValueError):
    pass


@dataclass(frozen=True)
class AttributionConfig:
    per_class: int = 25
    background_size: int = 100
    mode: str = "sampled"
    n_permutations: int = 10
    seed: int = 0
    exact_cap: int = EXACT_CAP
    top_k: int = 10

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.per_class < 1 or self.background_size < 1 or self.n_permutations < 1:
            raise ValueError("per_class, background_size and n_permutations must be >= 1")


@dataclass
class Explained:
    row: int
    label: str
    phi: PhiVector


@dataclass
class ShapSummary:
    feature_names: list[str]
    classes: list[str]
    explained: list[Explained] = field(default_factory=list)

    def mean_abs(self, cls: str | None = None) -> np.ndarray:
        """Mean |phi| per feature over one class's instances, or all of them."""
        rows = [e.phi.values for e in self.explained if cls is None or e.label == cls]
        if not rows:
            return np.zeros(len(self.feature_names))
        return np.abs(np.vstack(rows)).mean(axis=0)

    def ranking(self, cls: str | None = None, top_k: int | None = None) -> list[tuple[str, float]]:
        scores = self.mean_abs(cls)
        order = np.argsort(-scores, kind="stable")
        if top_k is not None:
            order = order[:top_k]
        return [(self.feature_names[i], float(scores[i])) for i in order]


def sample_rows(n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    if size >= n:
        return np.arange(n)
    return np.sort(rng.choice(n, size, replace=False))


def class_shap_summary(model: ModelArtifact, table: FeatureTable,
                       config: AttributionConfig = AttributionConfig(),
                       background: FeatureTable | None = None) -> ShapSummary:
    """Explain `per_class` seeded rows of each class, each toward its own class.

    The background defaults to a seeded sample of `table` itself; pass the
    training table to keep explanations independent of the rows explained.
    """
    bg_seed, pick_seed, inst_seed = np.random.SeedSequence(config.seed).spawn(3)
    source = background if background is not None else table
    bg_rows = sample_rows(len(source), config.background_size, np.random.default_rng(bg_seed))
    bg = source.select(model.feature_names).values[bg_rows]
    X = table.select(model.feature_names).values
    labels = table.labels()
    classes = class_vocabulary(labels)
    pick = np.random.default_rng(pick_seed)
    chosen = []
    for cls in classes:
        rows = np.flatnonzero(labels == cls)
        if rows.size < config.per_class:
            raise SamplingError(
                f"class {cls!r} has {rows.size} rows, fewer than the {config.per_class} requested"
            )
        chosen.extend((int(r), cls) for r in np.sort(pick.choice(rows, config.per_class,
                                                                 replace=False)))
    summary = ShapSummary(list(model.feature_names), classes)
    for (row, cls), seed in zip(chosen, inst_seed.spawn(len(chosen))):
        if config.mode == "exact":
            phi = shapley_exact(model, X[row], bg, cls, cap=config.exact_cap)
        else:
            phi = shapley_sampled(model, X[row], bg, cls, config.n_permutations, seed)
        summary.explained.append(Explained(row, cls, phi))
    return summary
