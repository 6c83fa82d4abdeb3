"""Behaviour vocabularies and the merge into four training classes."""
from __future__ import annotations

from collections import Counter
from dataclasses import replace
from pathlib import Path
from typing import Iterable, Mapping

from .samples import Sample

# Observed behaviours with annotated datapoint counts.
BEHAVIOURS = {
    "RES": (226561, "Resting in standing position"),
    "RUS": (195600, "Ruminating in standing position"),
    "REL": (130960, "Resting in lying position"),
    "FEP": (112079, "Feeding in Pot"),
    "MOV": (16320, "Moving"),
    "LCK": (8240, "Licking"),
    "ATT": (1280, "Attacking"),
    "DEF": (960, "Defecating"),
    "DRN": (880, "Drinking"),
    "URI": (640, "Urinating"),
}

# Fixed vocabulary order; also the tie-break order for modal window labels.
CLASSES = ("STN", "REL", "RUS", "ETC")

DEFAULT_MAPPING: dict[str, str] = {
    "RES": "STN", "MOV": "STN",
    "RUS": "RUS",
    "REL": "REL",
    "FEP": "ETC", "LCK": "ETC", "ATT": "ETC", "DEF": "ETC", "DRN": "ETC", "URI": "ETC",
    # already-merged codes map to themselves so mapping is idempotent
    "STN": "STN", "ETC": "ETC",
}

ALL_CODES = tuple(CLASSES) + tuple(c for c in BEHAVIOURS if c not in CLASSES)


class LabelMappingError(ValueError):
    def __init__(self, codes):
        self.codes = sorted(codes)
        super().__init__(f"unknown label codes: {', '.join(self.codes)}")


def load_mapping(path) -> dict[str, str]:
    """Read ``OLD=NEW`` (or ``OLD,NEW``) lines; ``#`` starts a comment."""
    mapping = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ","
        old, _, new = line.partition(sep)
        if not old.strip() or not new.strip():
            raise ValueError(f"{path}:{lineno}: expected OLD=NEW, got {line!r}")
        mapping[old.strip()] = new.strip()
    return mapping


def merged_mapping(override: Mapping[str, str] | None = None) -> dict[str, str]:
    mapping = dict(DEFAULT_MAPPING)
    if override:
        mapping.update(override)
    return mapping


def map_labels(samples: Iterable[Sample], mapping: Mapping[str, str] | None = None) -> list[Sample]:
    """Replace each label by its merged class; unlabeled samples pass through."""
    mapping = DEFAULT_MAPPING if mapping is None else mapping
    samples = list(samples)
    unknown = {s.label for s in samples if s.label is not None and s.label not in mapping}
    if unknown:
        raise LabelMappingError(unknown)
    return [s if s.label is None else replace(s, label=mapping[s.label]) for s in samples]


def label_distribution(labels: Iterable[str | None]) -> list[tuple[str, int, float]]:
    """(class, count, percentage) rows, largest class first."""
    counts = Counter(lbl for lbl in labels if lbl is not None)
    total = sum(counts.values())
    rows = [(c, n, 100.0 * n / total) for c, n in counts.items()]
    return sorted(rows, key=lambda r: (-r[1], r[0]))


def format_distribution(rows) -> str:
    lines = ["class\tcount\tpercentage"]
    lines += [f"{c}\t{n}\t{pct:.2f}%" for c, n, pct in rows]
    return "\n".join(lines) + "\n"
