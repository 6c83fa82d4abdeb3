"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line that is printed in the "acceptance
criteria" section of the pytest terminal summary.
"""
import functools
import math
import time

import numpy as np
import pytest

import oracles
from conftest import ACCEPTANCE_LINES
from cattle_activity.cli import REPORTS, main
from cattle_activity.explain import ks_statistic, shapley_exact, shapley_sampled, stability_category
from cattle_activity.explain.stability import MODERATE, UNSTABLE
from cattle_activity.features import (
    WindowConfig,
    add_lag_features,
    base_feature_names,
    mean_vector_magnitude,
    movement_variation,
    signal_magnitude_area,
    window_feature_vector,
    window_statistics,
)
from cattle_activity.models import leaf_weight
from cattle_activity.models.metrics import auc_binary
from cattle_activity.signal import (
    dwt_decompose,
    dwt_reconstruct,
    savitzky_golay,
    shannon_entropy,
    signal_energy,
)
from cattle_activity.table import FeatureTable


def criterion(number: int, title: str, limit_s: float):
    """Record a PASS/FAIL summary line for the wrapped test and enforce its time budget."""
    def wrap(test):
        @functools.wraps(test)
        def run(*args, **kwargs):
            start = time.perf_counter()
            try:
                detail = test(*args, **kwargs)
                took = time.perf_counter() - start
                assert took < limit_s, f"took {took:.1f}s, budget {limit_s:.0f}s"
            except BaseException as exc:
                reason = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
                ACCEPTANCE_LINES.append(f"FAIL  {number:2d}  {title}: {reason[:120]}")
                raise
            note = f" ({detail}; {took:.1f}s)" if detail else f" ({took:.1f}s)"
            ACCEPTANCE_LINES.append(f"PASS  {number:2d}  {title}{note}")
        return run
    return wrap


WINDOW = WindowConfig(window_length=16, step_length=8)
NAMES = base_feature_names()


def close(got, want, tol=1e-12):
    return abs(got - want) <= tol * max(1.0, abs(want))


@criterion(1, "window statistics and scalar features match the reference oracle", 10)
def test_statistics_against_oracle():
    rng = np.random.default_rng(1)
    worst = 0.0
    for i in range(1000):
        n = int(rng.integers(2, 320))
        kind = i % 4
        if kind == 0:
            x = rng.normal(rng.normal(), rng.uniform(0.01, 3), n)
        elif kind == 1:
            x = rng.integers(-3, 4, n).astype(float)  # heavy ties
        elif kind == 2:
            x = rng.exponential(2.0, n)
        else:
            x = np.full(n, rng.normal())
        got = window_statistics(x)
        want = oracles.window_stats(x.tolist())
        for key, value in want.items():
            err = abs(got[key] - value) / max(1.0, abs(value))
            worst = max(worst, err)
            assert err <= 1e-12, (i, key, got[key], value)
        assert close(shannon_entropy(x), oracles.entropy(x.tolist()))
        assert close(signal_energy(x), oracles.energy(x.tolist()))
        xyz = np.c_[x, rng.normal(size=(n, 2))]
        rows = xyz.tolist()
        assert close(signal_magnitude_area(xyz), oracles.sma(rows))
        assert close(mean_vector_magnitude(xyz), oracles.mean_vm(rows))
        assert close(movement_variation(xyz), oracles.movement_variation(rows))
        if n >= 16:
            vec, _ = window_feature_vector(xyz, WINDOW)
            vm = [math.sqrt(a * a + b * b + c * c) for a, b, c in rows]
            assert close(vec[NAMES.index("Energy")], oracles.window_energy(rows))
            assert close(vec[NAMES.index("Entropy")], oracles.entropy(vm))
    return f"1000 windows, worst relative error {worst:.1e}"


@criterion(2, "smoothing reproduces polynomials, DWT conserves energy and round-trips", 30)
def test_signal_suite():
    rng = np.random.default_rng(2)
    for window, order in [(5, 0), (5, 2), (7, 3), (11, 3), (9, 4), (15, 6)]:
        t = np.linspace(-3, 3, 80)
        y = np.polyval(rng.normal(size=order + 1), t)
        assert np.max(np.abs(savitzky_golay(y, window, order) - y)) < 1e-9

    for wavelet in ("haar", "db4"):
        for levels in (1, 2, 3):
            for n in (8 * 2 ** levels, 96, 256):
                x = rng.normal(size=n)
                bands = dwt_decompose(x, levels, wavelet, "periodization").bands().values()
                total = sum(float(np.dot(c, c)) for c in bands)
                assert close(total, float(np.dot(x, x)), 1e-10)

    worst = 0.0
    for n in range(8, 513):
        for levels in (1, 2, 3):
            for mode in ("symmetric", "periodization"):
                if mode == "periodization" and n % 2 ** levels:
                    continue
                x = rng.normal(size=n)
                back = dwt_reconstruct(dwt_decompose(x, levels, "db4", mode))
                err = float(np.max(np.abs(back - x)))
                worst = max(worst, err)
                assert err < 1e-9, (n, levels, mode, err)
    return f"worst round-trip error {worst:.1e}"


@criterion(3, "lag columns hold the same device's earlier rows", 5)
def test_lag_property():
    rng = np.random.default_rng(3)
    checked = 0
    for _ in range(200):
        sizes = rng.integers(1, 15, int(rng.integers(1, 5)))
        devices = np.repeat([f"d{i}" for i in range(len(sizes))], sizes)
        n, c = len(devices), int(rng.integers(1, 4))
        table = FeatureTable([f"C{i}" for i in range(c)], rng.normal(size=(n, c)), devices,
                             np.arange(n) * 1000, ["STN"] * n, rng.random(n) < 0.1)
        max_lag = int(rng.integers(1, 6))
        out = add_lag_features(table, max_lag)
        assert len(out) == sum(max(0, s - max_lag) for s in sizes)
        assert out.n_features == c * (max_lag + 1)
        source = {ts: i for i, ts in enumerate(table.timestamp_max)}
        for r in range(len(out)):
            i = source[out.timestamp_max[r]]
            assert out.device_id[r] == table.device_id[i]
            assert table.device_id[i - max_lag] == table.device_id[i]
            flag = False
            for k in range(max_lag + 1):
                for j in range(c):
                    name = f"C{j}" if k == 0 else f"C{j}_lag_{k}"
                    assert out.column(name)[r] == table.values[i - k, j]
                flag |= bool(table.degenerate[i - k])
            assert out.degenerate[r] == flag
            checked += 1
    return f"{checked} lagged rows"


def toy_model(rows):
    # f2 and f3 enter symmetrically, f7 never enters
    return (rows[:, 0] * rows[:, 1] + np.tanh(rows[:, 2] + rows[:, 3])
            + 0.5 * rows[:, 4] ** 2 - rows[:, 5] * np.sin(rows[:, 6]))


@criterion(4, "Shapley efficiency, symmetry, null player and sampling accuracy", 120)
def test_shapley_axioms():
    rng = np.random.default_rng(4)
    for f in range(2, 9):
        weights = rng.normal(size=f)
        bg = rng.normal(size=(6, f))
        x = rng.normal(size=f)

        def model(rows, w=weights):
            return np.tanh(rows @ w) + rows[:, 0] * rows[:, -1]

        phi = shapley_exact(model, x, bg)
        assert abs(phi.efficiency_gap) < 1e-9

    bg = rng.normal(size=(6, 8))
    bg[:, 3] = bg[:, 2]
    x = rng.normal(size=8)
    x[3] = x[2]
    exact = shapley_exact(toy_model, x, bg)
    assert abs(exact.efficiency_gap) < 1e-9
    assert abs(exact.values[2] - exact.values[3]) < 1e-9
    assert exact.values[7] == 0.0
    sampled = shapley_sampled(toy_model, x, bg, n_permutations=20000, seed=4)
    assert sampled.values[7] == 0.0
    gap = float(np.max(np.abs(sampled.values - exact.values)))
    assert gap <= 0.01, f"sampled differs from exact by {gap:.4f}"
    return f"max sampled-vs-exact gap {gap:.4f}"


@criterion(5, "KS statistic equals brute force; stability categories", 10)
def test_ks_and_categories():
    rng = np.random.default_rng(5)
    for i in range(1000):
        n, m = rng.integers(1, 101, 2)
        if i % 2:
            a, b = rng.integers(0, 20, n).astype(float), rng.integers(0, 20, m).astype(float)
        else:
            a, b = rng.normal(size=n), rng.normal(rng.normal(0, 0.5), 1, size=m)
        assert ks_statistic(a, b) == oracles.ks(a.tolist(), b.tolist())
    for d in (0.2, 0.3, 0.4):
        assert stability_category(d) == MODERATE
    for d in (0.5, 0.6):
        assert stability_category(d) == UNSTABLE
    return "1000 sample pairs"


@criterion(6, "AUC matches the pairwise definition", 10)
def test_auc_against_pairs():
    rng = np.random.default_rng(6)
    done = 0
    while done < 500:
        n = int(rng.integers(2, 201))
        scores = np.round(rng.random(n), int(rng.integers(1, 5)))
        positive = rng.random(n) < rng.uniform(0.1, 0.9)
        if positive.all() or not positive.any():
            continue
        assert abs(auc_binary(scores, positive) - oracles.auc_pairs(scores, positive)) <= 1e-12
        done += 1
    return "500 tables"


@criterion(7, "boosting leaf weight follows the soft-threshold closed form", 5)
def test_leaf_weight_grid():
    rng = np.random.default_rng(7)
    G = rng.uniform(-10, 10, 10_000)
    H = rng.uniform(0, 10, 10_000)
    alpha = rng.uniform(0, 5, 10_000)
    lam = rng.uniform(0.01, 5, 10_000)
    got = leaf_weight(G, H, alpha, lam)
    for g, h, a, l, w in zip(G, H, alpha, lam, got):
        if g > a:
            want = -(g - a) / (h + l)
        elif g < -a:
            want = -(g + a) / (h + l)
        else:
            want = 0.0
        assert w == want
    assert np.all(got[alpha >= np.abs(G)] == 0)
    return "10000 tuples"


# -- command-line runs -------------------------------------------------------

EXPLAIN_SMALL = ["--set", "explain.background=10", "--set", "explain.per_class=3",
                 "--set", "explain.permutations=2", "--set", "stability.features=5"]


@pytest.fixture(scope="module")
def herd(tmp_path_factory):
    path = tmp_path_factory.mktemp("herd") / "herd.bin"
    assert main(["synth", str(path), "--format", "packets", "--seed", "21",
                 "--devices", "4", "--duration", "7200"]) == 0
    return path


def read_tsv(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    header = lines[0].split("\t")
    return [dict(zip(header, l.split("\t"))) for l in lines[1:]]


@criterion(8, "end-to-end run on a two-hour synthetic herd", 300)
def test_end_to_end(herd, tmp_path):
    code = main(["run", "--input", str(herd), "--out", str(tmp_path), "--seed", "8",
                 "--window", "156", "--step", "39", "--set", "grid.knn.n_neighbors=3",
                 "--set", "grid.knn.p=1", "--set", "grid.knn.weights=distance"] + EXPLAIN_SMALL)
    assert code == 0
    test = next(r for r in read_tsv(tmp_path / "test_metrics.tsv") if r["split"] == "test")
    accuracy, auc = float(test["accuracy"]), float(test["auc"])
    assert accuracy >= 0.90, test
    assert auc >= 0.95, test
    return f"accuracy {accuracy:.4f}, AUC {auc:.4f}"


@criterion(9, "grid over two models and two windows selects the best fold-mean F1", 600)
def test_grid_two_by_two(herd, tmp_path):
    code = main(["run", "--input", str(herd), "--out", str(tmp_path), "--seed", "9",
                 "--set", "models=knn,random_forest", "--set", "windows=156/39,316/79",
                 "--set", "grid.random_forest.n_estimators=10", "--set", "folds=5"]
                + EXPLAIN_SMALL)
    assert code == 0
    rows = read_tsv(tmp_path / "grid_search.tsv")
    assert len(rows) == 4
    assert {(r["model"], r["window"], r["step"]) for r in rows} == {
        (m, w, s) for m in ("knn", "random_forest") for w, s in (("156", "39"), ("316", "79"))}
    for r in rows:
        assert r["folds"] == "5"
        for metric in ("accuracy", "precision", "recall", "f1"):
            assert " ± " in r[metric]
    top = max(float(r["f1_mean"]) for r in rows)
    selected = [r for r in rows if r["selected"] == "1"]
    assert len(selected) == 1 and float(selected[0]["f1_mean"]) == top
    s = selected[0]
    return f"selected {s['model']} {s['window']}/{s['step']}, F1 {s['f1']}"


@criterion(10, "same seed gives byte-identical reports", 600)
def test_reports_reproducible(tmp_path):
    herd = tmp_path / "herd.bin"
    assert main(["synth", str(herd), "--format", "packets", "--seed", "10",
                 "--devices", "3", "--duration", "1200"]) == 0
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["run", "--input", str(herd), "--out", str(out), "--seed", "10",
                     "--set", "models=knn,random_forest",
                     "--set", "grid.random_forest.n_estimators=5"] + EXPLAIN_SMALL) == 0
        outputs.append({r: (out / r).read_bytes() for r in REPORTS})
    differ = [r for r in REPORTS if outputs[0][r] != outputs[1][r]]
    assert not differ, f"reports differ: {differ}"
    return f"{len(REPORTS)} reports compared"
