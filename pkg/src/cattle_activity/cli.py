"""Command-line pipeline: ingest -> extract -> train -> evaluate -> explain -> stability -> report.

Every stage reads and writes inside one output directory (``--out``).
Settings come from a ``key=value`` config file (``--config``) with flag
overrides; ``--set key=value`` overrides any key. A hash of the resolved
settings is written into every report and stage manifest, and a stage
refuses upstream outputs produced under a different hash.

Exit status: 0 success, 1 unexpected error, 2 bad usage or config,
3 malformed input file, 4 unknown label code, 5 missing upstream output,
6 config hash mismatch, 7 data too small for the requested split/sampling.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import (
    CleaningPolicy,
    LabelMappingError,
    PacketError,
    SplitError,
    clean,
    label_distribution,
    load_mapping,
    map_labels,
    merged_mapping,
    packetize,
    parse_samples,
    replay_gateway,
    simulate_store_and_forward,
    synth_generate,
    write_packet_log,
    write_samples,
)
from .dataset.gateway import MAGIC
from .dataset.samples import FormatError
from .dataset.split import group_split_indices, split_indices
from .dataset.synth import SynthConfig
from .explain import (
    AttributionConfig,
    SamplingError,
    StabilityThresholds,
    class_shap_summary,
    stability_report,
)
from .features import OrderingError, WindowConfig, build_feature_table
from .models import (
    KINDS,
    EvaluationError,
    ModelError,
    StratificationError,
    evaluate,
    load_model,
    roc_curve,
    save_model,
)
from .models.artifact import ModelSpec, fit_model
from .models.metrics import per_class_auc
from .models.search import GridResult, best_result, expand_grid, format_mean_std, search_jobs
from .table import FeatureTable, SchemaError, atomic_write

log = logging.getLogger("cattle_activity")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_MAPPING = 4
EXIT_MISSING = 5
EXIT_HASH = 6
EXIT_DATA = 7

DEFAULTS = {
    "seed": "",
    "input": "",
    "mapping": "",
    "device_id": "",
    "sample_period_ms": "",
    "clean.max_gap": "3",
    "clean.clamp_g": "16.0",
    "window": "156",
    "step": "39",
    "windows": "",
    "max_lag": "5",
    "sg_window": "11",
    "sg_polyorder": "3",
    "wavelet": "db4",
    "wavelet_levels": "3",
    "wavelet_mode": "symmetric",
    "entropy_bins": "10",
    "max_gap_ms": "",
    "split": "0.6,0.2,0.2",
    "group_by_device": "false",
    "models": "knn",
    "folds": "5",
    "refit_with_validation": "false",
    "n_jobs": "1",
    "grid.knn.n_neighbors": "3",
    "grid.knn.p": "1",
    "grid.knn.weights": "distance",
    "grid.random_forest.n_estimators": "100",
    "grid.random_forest.max_depth": "30",
    "grid.random_forest.min_samples_split": "2",
    "grid.gradient_boosting.learning_rate": "0.1",
    "grid.gradient_boosting.max_depth": "7",
    "grid.gradient_boosting.n_estimators": "200",
    "grid.gradient_boosting.reg_alpha": "0.1",
    "grid.gradient_boosting.reg_lambda": "0.01",
    "explain.mode": "sampled",
    "explain.background": "100",
    "explain.per_class": "25",
    "explain.permutations": "10",
    "explain.top_k": "10",
    "explain.split": "test",
    "stability.features": "10",
    "stability.moderate": "0.2",
    "stability.unstable": "0.45",
    "stability.compare": "train,test",
}
# keys that only say where things live; they do not change results
UNHASHED = {"input"}

REPORTS = ("grid_search.tsv", "test_metrics.tsv", "confusion.tsv", "auc.tsv",
           "shap_topk.tsv", "stability.tsv")


class CliError(Exception):
    code = EXIT_ERROR


class ConfigError(CliError):
    code = EXIT_USAGE


class MissingArtifactError(CliError):
    code = EXIT_MISSING


class HashMismatchError(CliError):
    code = EXIT_HASH


# -- configuration -----------------------------------------------------------

def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {line!r}")
        values[key.strip()] = value.strip()
    return values


def _check_keys(values: dict[str, str], source: str) -> None:
    for key in values:
        if key in DEFAULTS:
            continue
        parts = key.split(".")
        if len(parts) == 3 and parts[0] == "grid" and parts[1] in KINDS:
            ModelSpec(parts[1], {parts[2]: None})  # raises on unknown names
            continue
        raise ConfigError(f"{source}: unknown config key {key!r}")


def scalar(text: str):
    """Parse one config value: int, float, bool, none or plain string."""
    low = text.lower()
    if low in ("none", "null"):
        return None
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def _split_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


@dataclass
class RunConfig:
    values: dict[str, str]
    out: Path

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        values = dict(DEFAULTS)
        if args.config:
            path = Path(args.config)
            if not path.is_file():
                raise ConfigError(f"config file {path} not found")
            loaded = parse_config_text(path.read_text(), str(path))
            _check_keys(loaded, str(path))
            values.update(loaded)
        overrides = {}
        for item in args.set or []:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"--set expects key=value, got {item!r}")
            overrides[key.strip()] = value.strip()
        for key in ("seed", "window", "step", "input", "mapping"):
            flag = getattr(args, key, None)
            if flag is not None:
                overrides[key] = str(flag)
        if getattr(args, "window", None) is not None or getattr(args, "step", None) is not None:
            overrides["windows"] = ""  # an explicit window replaces any variant list
        _check_keys(overrides, "command line")
        values.update(overrides)
        if values["seed"] == "":
            raise ConfigError("a seed is required: pass --seed or set seed= in the config")
        cfg = cls(values, Path(args.out))
        cfg.validate()
        return cfg

    def get(self, key: str) -> str:
        return self.values[key]

    def integer(self, key: str) -> int:
        try:
            return int(self.values[key])
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {self.values[key]!r}") from None

    def number(self, key: str) -> float:
        try:
            return float(self.values[key])
        except ValueError:
            raise ConfigError(f"{key} must be a number, got {self.values[key]!r}") from None

    def flag(self, key: str) -> bool:
        v = self.values[key].lower()
        if v not in ("true", "false"):
            raise ConfigError(f"{key} must be true or false, got {self.values[key]!r}")
        return v == "true"

    def optional_int(self, key: str) -> int | None:
        return self.integer(key) if self.values[key] else None

    @property
    def seed(self) -> int:
        return self.integer("seed")

    def validate(self) -> None:
        self.seed
        self.window_variants()
        self.split_ratios()
        for kind in self.model_kinds():
            expand_grid(self.grid(kind))
        if self.get("mapping") and not Path(self.get("mapping")).is_file():
            raise ConfigError(f"mapping file {self.get('mapping')} not found")
        if self.get("explain.split") not in ("validation", "test"):
            raise ConfigError("explain.split must be 'validation' or 'test'")
        self.compare_splits()
        self.attribution()

    def window_config(self, window: int, step: int) -> WindowConfig:
        try:
            return WindowConfig(
                window_length=window, step_length=step,
                max_lag=self.integer("max_lag"), sg_window=self.integer("sg_window"),
                sg_polyorder=self.integer("sg_polyorder"), wavelet=self.get("wavelet"),
                wavelet_levels=self.integer("wavelet_levels"),
                wavelet_mode=self.get("wavelet_mode"),
                entropy_bins=self.integer("entropy_bins"),
                max_gap_ms=self.optional_int("max_gap_ms"),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def window_variants(self) -> list[tuple[int, int]]:
        if not self.get("windows"):
            variants = [(self.integer("window"), self.integer("step"))]
        else:
            variants = []
            for item in _split_list(self.get("windows")):
                w, sep, s = item.partition("/")
                if not sep or not w.isdigit() or not s.isdigit():
                    raise ConfigError(f"windows entries look like 156/39, got {item!r}")
                variants.append((int(w), int(s)))
        for w, s in variants:
            self.window_config(w, s)
        return variants

    def split_ratios(self) -> tuple[float, float, float]:
        try:
            ratios = tuple(float(v) for v in _split_list(self.get("split")))
        except ValueError:
            raise ConfigError(f"split must be three numbers, got {self.get('split')!r}") from None
        if len(ratios) != 3 or min(ratios) < 0 or not np.isclose(sum(ratios), 1.0):
            raise ConfigError("split must be three non-negative numbers summing to 1")
        return ratios

    def model_kinds(self) -> list[str]:
        kinds = _split_list(self.get("models"))
        unknown = [k for k in kinds if k not in KINDS]
        if unknown or not kinds:
            raise ConfigError(f"models must list some of {KINDS}, got {self.get('models')!r}")
        return kinds

    def grid(self, kind: str) -> dict[str, list]:
        prefix = f"grid.{kind}."
        return {k[len(prefix):]: [scalar(v) for v in _split_list(self.values[k])]
                for k in sorted(self.values) if k.startswith(prefix) and self.values[k]}

    def attribution(self) -> AttributionConfig:
        try:
            return AttributionConfig(
                per_class=self.integer("explain.per_class"),
                background_size=self.integer("explain.background"),
                mode=self.get("explain.mode"),
                n_permutations=self.integer("explain.permutations"),
                seed=self.seed,
                top_k=self.integer("explain.top_k"),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def thresholds(self) -> StabilityThresholds:
        return StabilityThresholds(self.number("stability.moderate"),
                                   self.number("stability.unstable"))

    def compare_splits(self) -> tuple[str, str]:
        pair = _split_list(self.get("stability.compare"))
        if len(pair) != 2 or any(p not in ("train", "validation", "test") for p in pair):
            raise ConfigError("stability.compare must name two of train, validation, test")
        return pair[0], pair[1]

    def hash(self) -> str:
        lines = []
        for key in sorted(self.values):
            if key in UNHASHED:
                continue
            value = self.values[key]
            if key == "mapping" and value:
                value = hashlib.sha256(Path(value).read_bytes()).hexdigest()
            lines.append(f"{key}={value}\n")
        return hashlib.sha256("".join(lines).encode()).hexdigest()[:16]

    def dump(self) -> str:
        return "".join(f"{k}={self.values[k]}\n" for k in sorted(self.values))


# -- file helpers ------------------------------------------------------------

def features_path(out: Path, window: int, step: int) -> Path:
    return out / f"features_{window}x{step}.csv"


def write_report(path: Path, cfg: RunConfig, header: list[str], rows) -> None:
    """Tab-separated report preceded by ``# config_hash=`` and ``# seed=`` lines."""
    with atomic_write(path) as fh:
        fh.write(f"# config_hash={cfg.hash()}\n# seed={cfg.seed}\n")
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    log.info("wrote %s", path)


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def read_report(path: Path, cfg: RunConfig, producer: str) -> list[dict[str, str]]:
    if not path.is_file():
        raise MissingArtifactError(f"{path} not found: run {producer} first")
    lines = path.read_text(encoding="utf-8").splitlines()
    meta = dict(line[2:].split("=", 1) for line in lines if line.startswith("# "))
    if meta.get("config_hash") != cfg.hash():
        raise HashMismatchError(
            f"{path} was written with config hash {meta.get('config_hash')}, "
            f"current is {cfg.hash()}; rerun {producer}"
        )
    body = [line for line in lines if not line.startswith("# ")]
    return list(csv.DictReader(body, delimiter="\t"))


def write_manifest(cfg: RunConfig, stage: str, outputs: dict) -> None:
    manifest = {"stage": stage, "config_hash": cfg.hash(), "seed": cfg.seed, **outputs}
    with atomic_write(cfg.out / f"{stage}.manifest.json") as fh:
        fh.write(json.dumps(manifest, sort_keys=True, indent=1) + "\n")


def read_manifest(cfg: RunConfig, stage: str) -> dict:
    path = cfg.out / f"{stage}.manifest.json"
    if not path.is_file():
        raise MissingArtifactError(f"{path} not found: run {stage} first")
    manifest = json.loads(path.read_text())
    if manifest.get("config_hash") != cfg.hash():
        raise HashMismatchError(
            f"{path} was written with config hash {manifest.get('config_hash')}, "
            f"current is {cfg.hash()}; rerun {stage}"
        )
    return manifest


def _load_model(cfg: RunConfig):
    path = cfg.out / "model.zip"
    if not path.is_file():
        raise MissingArtifactError(f"{path} not found: run train first")
    model, extra = load_model(path)
    if extra.get("config_hash") != cfg.hash():
        raise HashMismatchError(
            f"{path} was trained with config hash {extra.get('config_hash')}, "
            f"current is {cfg.hash()}; rerun train"
        )
    return model, extra


def _load_features(cfg: RunConfig, window: int, step: int) -> FeatureTable:
    read_manifest(cfg, "extract")
    path = features_path(cfg.out, window, step)
    if not path.is_file():
        raise MissingArtifactError(f"{path} not found: run extract first")
    return FeatureTable.from_csv(path)


def _split_rows(cfg: RunConfig, table: FeatureTable) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if cfg.flag("group_by_device"):
        return group_split_indices(table.device_id, cfg.split_ratios(), cfg.seed)
    return split_indices(table.labels(), cfg.split_ratios(), cfg.seed)


def _load_splits(cfg: RunConfig, table: FeatureTable) -> dict[str, FeatureTable]:
    rows = read_report(cfg.out / "split.tsv", cfg, "train")
    where = {(r["device_id"], int(r["timestamp_max"])): r["split"] for r in rows}
    keys = [(d, int(t)) for d, t in zip(table.device_id, table.timestamp_max)]
    missing = [k for k in keys if k not in where]
    if missing or len(keys) != len(where):
        raise HashMismatchError("split.tsv does not match the feature table; rerun train")
    assigned = np.array([where[k] for k in keys])
    return {name: table.take(np.flatnonzero(assigned == name))
            for name in ("train", "validation", "test")}


# -- commands ----------------------------------------------------------------

def cmd_synth(cfg: RunConfig, args) -> None:
    """Write a seeded synthetic herd as a sample CSV or a gateway packet log."""
    samples = synth_generate(SynthConfig(n_devices=args.devices, duration_s=args.duration),
                             cfg.seed)
    target = Path(args.target)
    if args.format == "packets":
        packets = simulate_store_and_forward(packetize(samples), cfg.seed)
        write_packet_log(target, packets)
    else:
        write_samples(target, samples)
    log.info("wrote %d samples to %s", len(samples), target)


def cmd_ingest(cfg: RunConfig) -> None:
    src = cfg.get("input")
    if not src:
        raise ConfigError("ingest needs --input or input= in the config")
    src = Path(src)
    if not src.is_file():
        raise MissingArtifactError(f"input file {src} not found")
    with open(src, "rb") as fh:
        is_packets = fh.read(len(MAGIC)) == MAGIC
    if is_packets:
        samples = replay_gateway(src)
    else:
        samples = parse_samples(src, rejects_path=cfg.out / "samples.rejects.csv",
                                device_id=cfg.get("device_id") or None,
                                sample_period_ms=cfg.optional_int("sample_period_ms"))
    raw = label_distribution(s.label for s in samples)
    override = load_mapping(cfg.get("mapping")) if cfg.get("mapping") else None
    samples = map_labels(samples, merged_mapping(override))
    policy = CleaningPolicy(max_gap=cfg.integer("clean.max_gap"),
                            clamp_g=cfg.number("clean.clamp_g"),
                            sample_period_ms=cfg.optional_int("sample_period_ms"))
    samples, report = clean(samples, policy)
    write_samples(cfg.out / "samples.csv", samples)
    rows = [("cleaning", k, v, "") for k, v in vars(report).items()]
    rows += [("raw_labels", c, n, f"{p:.2f}") for c, n, p in raw]
    rows += [("merged_labels", c, n, f"{p:.2f}")
             for c, n, p in label_distribution(s.label for s in samples)]
    write_report(cfg.out / "ingest_report.tsv", cfg, ["section", "name", "count", "percent"], rows)
    write_manifest(cfg, "ingest", {"samples": len(samples), "source": src.name})


def cmd_extract(cfg: RunConfig) -> None:
    read_manifest(cfg, "ingest")
    samples = parse_samples(cfg.out / "samples.csv")
    n_jobs = cfg.integer("n_jobs")
    outputs = []
    for window, step in cfg.window_variants():
        table = build_feature_table(samples, cfg.window_config(window, step), n_jobs=n_jobs)
        if len(table) == 0:
            log.warning("window %d/%d produced no rows; stream shorter than a window", window, step)
        path = features_path(cfg.out, window, step)
        table.to_csv(path)
        outputs.append({"window": window, "step": step, "rows": len(table),
                        "features": table.n_features, "file": path.name})
        log.info("wrote %s (%d rows x %d features)", path, len(table), table.n_features)
    write_manifest(cfg, "extract", {"tables": outputs})


def cmd_train(cfg: RunConfig) -> None:
    tables, jobs = {}, []
    folds, seed = cfg.integer("folds"), cfg.seed
    for window, step in cfg.window_variants():
        table = _load_features(cfg, window, step)
        if len(table) == 0:
            raise SplitError(f"feature table for {window}/{step} is empty")
        parts = _split_rows(cfg, table)
        tables[(window, step)] = (table, parts)
    for kind in cfg.model_kinds():
        for (window, step), (table, parts) in tables.items():
            for params in expand_grid(cfg.grid(kind)):
                jobs.append((ModelSpec(kind, params, window, step), table.take(parts[0]), folds, seed))
    results = search_jobs(jobs, cfg.integer("n_jobs"))
    best = best_result(results)
    rows = []
    ranks = {id(r): i for i, r in enumerate(sorted(results, key=GridResult.sort_key), start=1)}
    for r in results:
        s = r.spec
        row = [s.kind, s.window_length, s.step_length,
               json.dumps(s.hyperparameters, sort_keys=True), len(r.folds)]
        row += [format_mean_std(r.mean(m), r.std(m)) for m in ("accuracy", "precision", "recall", "f1")]
        row += [v for m in ("accuracy", "precision", "recall", "f1") for v in (r.mean(m), r.std(m))]
        row += [ranks[id(r)], int(r is best)]
        rows.append(row)
    header = ["model", "window", "step", "params", "folds", "accuracy", "precision", "recall",
              "f1", "accuracy_mean", "accuracy_std", "precision_mean", "precision_std",
              "recall_mean", "recall_std", "f1_mean", "f1_std", "rank", "selected"]
    write_report(cfg.out / "grid_search.tsv", cfg, header, rows)

    key = (best.spec.window_length, best.spec.step_length)
    table, parts = tables[key]
    fit_rows = parts[0]
    if cfg.flag("refit_with_validation"):
        fit_rows = np.sort(np.concatenate([parts[0], parts[1]]))
    model = fit_model(best.spec, table.take(fit_rows), seed)
    save_model(cfg.out / "model.zip", model,
               {"config_hash": cfg.hash(), "seed": seed, "window": key[0], "step": key[1]})
    names = np.empty(len(table), dtype=object)
    for name, idx in zip(("train", "validation", "test"), parts):
        names[idx] = name
    write_report(cfg.out / "split.tsv", cfg, ["device_id", "timestamp_max", "split"],
                 zip(table.device_id, table.timestamp_max, names))
    log.info("selected %s", best.spec.label())


def cmd_evaluate(cfg: RunConfig) -> None:
    model, extra = _load_model(cfg)
    splits = _load_splits(cfg, _load_features(cfg, extra["window"], extra["step"]))
    spec = model.spec
    metric_rows, confusion_rows, auc_rows, roc_rows = [], [], [], []
    for name in ("validation", "test"):
        table = splits[name]
        if len(table) == 0:
            continue
        m = evaluate(model, table)
        metric_rows.append([name, spec.kind, spec.window_length, spec.step_length, len(table),
                            m.accuracy, m.precision_macro, m.recall_macro, m.f1_macro,
                            m.auc_ovr_macro])
        for i, cls in enumerate(model.classes):
            confusion_rows.append([name, cls] + [int(v) for v in m.confusion[i]])
        proba = model.predict_proba(table)
        y = model.encode(table.label)
        for cls, auc in zip(model.classes, per_class_auc(proba, y, len(model.classes))):
            auc_rows.append([name, cls, auc])
        auc_rows.append([name, "macro", m.auc_ovr_macro])
        for c, cls in enumerate(model.classes):
            if 0 < np.sum(y == c) < len(y):
                fpr, tpr, thr = roc_curve(proba[:, c], y == c)
                roc_rows += [[name, cls, a, b, t] for a, b, t in zip(fpr, tpr, thr)]
    write_report(cfg.out / "test_metrics.tsv", cfg,
                 ["split", "model", "window", "step", "rows", "accuracy", "precision",
                  "recall", "f1", "auc"], metric_rows)
    write_report(cfg.out / "confusion.tsv", cfg, ["split", "true"] + list(model.classes),
                 confusion_rows)
    write_report(cfg.out / "auc.tsv", cfg, ["split", "class", "auc"], auc_rows)
    write_report(cfg.out / "roc.tsv", cfg, ["split", "class", "fpr", "tpr", "threshold"],
                 roc_rows)


def cmd_explain(cfg: RunConfig) -> None:
    model, extra = _load_model(cfg)
    splits = _load_splits(cfg, _load_features(cfg, extra["window"], extra["step"]))
    attribution = cfg.attribution()
    summary = class_shap_summary(model, splits[cfg.get("explain.split")], attribution,
                                 background=splits["train"])
    rows = []
    for cls in summary.classes + ["ALL"]:
        ranking = summary.ranking(None if cls == "ALL" else cls, attribution.top_k)
        rows += [[cls, rank, feat, score] for rank, (feat, score) in enumerate(ranking, start=1)]
    write_report(cfg.out / "shap_topk.tsv", cfg, ["class", "rank", "feature", "mean_abs_shap"], rows)
    write_report(cfg.out / "shap_mean.tsv", cfg, ["rank", "feature", "mean_abs_shap"],
                 [[i, f, s] for i, (f, s) in enumerate(summary.ranking(), start=1)])
    write_report(cfg.out / "shap_instances.tsv", cfg,
                 ["class", "device_id", "timestamp_max", "base_value", "output"],
                 [[e.label, splits[cfg.get("explain.split")].device_id[e.row],
                   splits[cfg.get("explain.split")].timestamp_max[e.row],
                   e.phi.base_value, e.phi.output] for e in summary.explained])


def cmd_stability(cfg: RunConfig) -> None:
    model, extra = _load_model(cfg)
    ranked = read_report(cfg.out / "shap_mean.tsv", cfg, "explain")
    top = ranked[:cfg.integer("stability.features")]
    scores = {r["feature"]: float(r["mean_abs_shap"]) for r in top}
    splits = _load_splits(cfg, _load_features(cfg, extra["window"], extra["step"]))
    a, b = cfg.compare_splits()
    entries = stability_report(splits[a], splits[b], [r["feature"] for r in top], scores,
                               cfg.thresholds())
    write_report(cfg.out / "stability.tsv", cfg,
                 ["feature", "mean_abs_shap", "ks_statistic", "category", "extrapolated"],
                 [[e.feature, e.mean_abs_shap, e.ks_statistic, e.category,
                   "yes" if e.extrapolated else "no"] for e in entries])


def cmd_report(cfg: RunConfig) -> None:
    grid = read_report(cfg.out / "grid_search.tsv", cfg, "train")
    metrics = read_report(cfg.out / "test_metrics.tsv", cfg, "evaluate")
    topk = read_report(cfg.out / "shap_topk.tsv", cfg, "explain")
    stability = read_report(cfg.out / "stability.tsv", cfg, "stability")
    for name in ("confusion.tsv", "auc.tsv"):
        read_report(cfg.out / name, cfg, "evaluate")
    lines = [f"config hash: {cfg.hash()}", f"seed: {cfg.seed}", "",
             "Cross-validated grid (mean ± std over folds)"]
    for r in sorted(grid, key=lambda r: int(r["rank"])):
        mark = "*" if r["selected"] == "1" else " "
        lines.append(f" {mark} {r['model']} ({r['window']}/{r['step']}) {r['params']}: "
                     f"acc {r['accuracy']}  prec {r['precision']}  rec {r['recall']}  f1 {r['f1']}")
    lines += ["", "Held-out metrics"]
    for r in metrics:
        auc = float(r["auc"]) if r["auc"] else float("nan")
        lines.append(f"  {r['split']}: acc {float(r['accuracy']):.4f}  prec {float(r['precision']):.4f}"
                     f"  rec {float(r['recall']):.4f}  f1 {float(r['f1']):.4f}  auc {auc:.4f}")
    lines += ["", "Top features by mean |SHAP|"]
    for r in topk:
        if int(r["rank"]) <= 5:
            lines.append(f"  {r['class']:>4} {r['rank']:>2}. {r['feature']}, {float(r['mean_abs_shap']):.6f}")
    lines += ["", "Feature stability (KS distance)"]
    for r in stability:
        note = " (extrapolated category)" if r["extrapolated"] == "yes" else ""
        lines.append(f"  {r['feature']}, {float(r['mean_abs_shap']):.6f}, "
                     f"{float(r['ks_statistic']):.3f} ({r['category']}){note}")
    with atomic_write(cfg.out / "summary.txt") as fh:
        fh.write("\n".join(lines) + "\n")
    log.info("wrote %s", cfg.out / "summary.txt")


STAGES = {
    "ingest": cmd_ingest,
    "extract": cmd_extract,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "explain": cmd_explain,
    "stability": cmd_stability,
    "report": cmd_report,
}


def cmd_run(cfg: RunConfig) -> None:
    for stage in STAGES.values():
        stage(cfg)


# -- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value settings file")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, help="random seed (required here or in config)")
    common.add_argument("--window", type=int, help="window length in samples")
    common.add_argument("--step", type=int, help="step length in samples")
    common.add_argument("--input", help="sample CSV or gateway packet log (ingest)")
    common.add_argument("--mapping", help="label override file, OLD=NEW lines")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="cattle-activity", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="all stages in order")
    for name in STAGES:
        sub.add_parser(name, parents=[common], help=f"{name} stage")
    p = sub.add_parser("synth", parents=[common], help="write a synthetic herd")
    p.add_argument("target", help="output file")
    p.add_argument("--format", choices=("csv", "packets"), default="csv")
    p.add_argument("--devices", type=int, default=4)
    p.add_argument("--duration", type=float, default=7200.0, help="seconds per device")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        cfg = RunConfig.from_args(args)
        if args.command == "synth":
            cmd_synth(cfg, args)
        elif args.command == "run":
            cmd_run(cfg)
        else:
            STAGES[args.command](cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (FormatError, SchemaError, PacketError, OrderingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except LabelMappingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MAPPING
    except (SplitError, StratificationError, SamplingError, EvaluationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ModelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001
        log.debug("unexpected failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
