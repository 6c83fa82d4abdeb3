import json

import pytest

from cattle_activity.cli import REPORTS, RunConfig, build_parser, main
from cattle_activity.table import FeatureTable

SMALL = ["--set", "explain.background=5", "--set", "explain.per_class=2",
         "--set", "explain.permutations=1", "--set", "stability.features=4",
         "--set", "folds=3"]


@pytest.fixture(scope="module")
def herd(tmp_path_factory):
    path = tmp_path_factory.mktemp("herd") / "herd.bin"
    assert main(["synth", str(path), "--format", "packets", "--seed", "3",
                 "--devices", "3", "--duration", "900"]) == 0
    return path


@pytest.fixture(scope="module")
def pipeline(herd, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = main(["run", "--input", str(herd), "--out", str(out), "--seed", "7"] + SMALL)
    assert code == 0
    return out


def report_meta(path):
    return dict(line[2:].split("=", 1) for line in path.read_text().splitlines()
                if line.startswith("# "))


def test_full_pipeline_writes_every_report(pipeline):
    for name in REPORTS + ("summary.txt", "model.zip", "samples.csv", "features_156x39.csv",
                           "split.tsv", "roc.tsv", "shap_mean.tsv", "ingest_report.tsv"):
        assert (pipeline / name).is_file(), name
    hashes = {report_meta(pipeline / name)["config_hash"] for name in REPORTS}
    assert len(hashes) == 1
    assert all(report_meta(pipeline / name)["seed"] == "7" for name in REPORTS)


def test_grid_report_shape(pipeline):
    lines = (pipeline / "grid_search.tsv").read_text().splitlines()
    header = lines[2].split("\t")
    assert header[:9] == ["model", "window", "step", "params", "folds",
                          "accuracy", "precision", "recall", "f1"]
    row = dict(zip(header, lines[3].split("\t")))
    assert row["model"] == "knn" and row["folds"] == "3" and row["selected"] == "1"
    assert " ± " in row["f1"]


def test_ingest_report_sections(pipeline):
    text = (pipeline / "ingest_report.tsv").read_text()
    for section in ("cleaning", "raw_labels", "merged_labels"):
        assert f"\n{section}\t" in text


def test_summary_mentions_selection(pipeline):
    text = (pipeline / "summary.txt").read_text()
    assert "* knn (156/39)" in text and "Feature stability" in text


def test_extract_manifest_records_window(herd, tmp_path):
    # an explicit window changes the hashed config, so each run needs its own ingest
    for w, s in ((156, 39), (316, 79)):
        out = tmp_path / f"w{w}"
        args = ["--out", str(out), "--seed", "1", "--window", str(w), "--step", str(s)]
        assert main(["ingest", "--input", str(herd)] + args) == 0
        assert main(["extract"] + args) == 0
        manifest = json.loads((out / "extract.manifest.json").read_text())
        assert [(t["window"], t["step"]) for t in manifest["tables"]] == [(w, s)]
        table = FeatureTable.from_csv(out / f"features_{w}x{s}.csv")
        assert table.n_features == 600


def test_extract_is_byte_identical(herd, tmp_path):
    args = ["--out", str(tmp_path), "--seed", "2", "--window", "156", "--step", "39"]
    assert main(["ingest", "--input", str(herd)] + args) == 0
    assert main(["extract"] + args) == 0
    first = (tmp_path / "features_156x39.csv").read_bytes()
    assert main(["extract"] + args) == 0
    assert (tmp_path / "features_156x39.csv").read_bytes() == first


def test_evaluate_before_train(herd, tmp_path, capsys):
    args = ["--out", str(tmp_path), "--seed", "2"]
    assert main(["ingest", "--input", str(herd)] + args) == 0
    assert main(["extract"] + args) == 0
    assert main(["evaluate"] + args) == 5
    assert "run train first" in capsys.readouterr().err


def test_changed_seed_rejected(pipeline, capsys):
    assert main(["evaluate", "--out", str(pipeline), "--seed", "8"] + SMALL) == 6
    assert "config hash" in capsys.readouterr().err


def test_unknown_label_code(tmp_path, capsys):
    p = tmp_path / "s.csv"
    p.write_text("device_id,timestamp,acc_x,acc_y,acc_z,label\n"
                 "a,0,0,0,1,RES\na,200,0,0,1,XYZ\n")
    assert main(["ingest", "--input", str(p), "--out", str(tmp_path / "o"), "--seed", "1"]) == 4
    assert "XYZ" in capsys.readouterr().err


def test_mapping_override(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("device_id,timestamp,acc_x,acc_y,acc_z,label\n"
                 "a,0,0,0,1,MOV\na,200,0,0,1,RES\na,400,0,0,1,FOO\n")
    m = tmp_path / "map.txt"
    m.write_text("MOV=ETC\nFOO=REL\n")
    out = tmp_path / "o"
    assert main(["ingest", "--input", str(p), "--mapping", str(m), "--out", str(out),
                 "--seed", "1"]) == 0
    labels = [line.rsplit(",", 1)[1] for line in (out / "samples.csv").read_text().splitlines()[1:]]
    assert labels == ["ETC", "STN", "REL"]


def test_missing_seed_is_usage_error(herd, tmp_path, capsys):
    assert main(["ingest", "--input", str(herd), "--out", str(tmp_path)]) == 2
    assert "seed" in capsys.readouterr().err


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    cfg.write_text("seed=1\nwindw=10\n")
    assert main(["ingest", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "windw" in capsys.readouterr().err


def test_garbage_input_is_format_error(tmp_path):
    p = tmp_path / "junk.csv"
    p.write_bytes(b"\xff\xfe\x00garbage\x00\x81")
    assert main(["ingest", "--input", str(p), "--out", str(tmp_path / "o"), "--seed", "1"]) == 3


def test_truncated_packets_name_offset(herd, tmp_path, capsys):
    p = tmp_path / "cut.bin"
    p.write_bytes(herd.read_bytes()[:10])
    assert main(["ingest", "--input", str(p), "--out", str(tmp_path / "o"), "--seed", "1"]) == 3
    assert "byte offset 8" in capsys.readouterr().err


def test_flags_override_config(tmp_path):
    cfg_file = tmp_path / "c.txt"
    cfg_file.write_text("seed=1\nwindow=100\nstep=50\nfolds=4\n")
    args = build_parser().parse_args(["train", "--config", str(cfg_file), "--seed", "9",
                                      "--window", "200", "--set", "folds=3"])
    cfg = RunConfig.from_args(args)
    assert cfg.seed == 9 and cfg.integer("window") == 200 and cfg.integer("folds") == 3
    assert cfg.integer("step") == 50


def test_hash_ignores_input_path(tmp_path):
    a = RunConfig.from_args(build_parser().parse_args(["ingest", "--seed", "1", "--input", "x"]))
    b = RunConfig.from_args(build_parser().parse_args(["ingest", "--seed", "1", "--input", "y"]))
    c = RunConfig.from_args(build_parser().parse_args(["ingest", "--seed", "2", "--input", "x"]))
    assert a.hash() == b.hash() != c.hash()
    assert len(a.hash()) == 16
