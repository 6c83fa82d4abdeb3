import struct
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cattle_activity.dataset import (
    CleaningPolicy,
    LabelMappingError,
    Packet,
    PacketError,
    Sample,
    SplitError,
    SynthConfig,
    clean,
    format_distribution,
    label_distribution,
    load_mapping,
    map_labels,
    merge_packets,
    packetize,
    parse_samples,
    read_packet_log,
    replay_gateway,
    simulate_store_and_forward,
    stratified_split,
    synth_generate,
    write_packet_log,
    write_samples,
)
from cattle_activity.dataset.gateway import encode_packet
from cattle_activity.dataset.labels import ALL_CODES, BEHAVIOURS, CLASSES, DEFAULT_MAPPING
from cattle_activity.dataset.split import split_indices
from cattle_activity.dataset.synth import ParameterError, Regime
from cattle_activity.table import FeatureTable, SchemaError


def samples(n, device="d", period=200, label="STN", start=0):
    return [Sample(device, start + i * period, float(i), -float(i), 1.0, label) for i in range(n)]


# -- sample CSV --------------------------------------------------------------

def test_parse_four_column_file_with_injected_identity(tmp_path):
    p = tmp_path / "cow.csv"
    p.write_text("AccX,AccY,AccZ,Label\n0.1,0.2,0.9,RES\n0.2,0.1,1.0,RUS\n0.0,0.3,0.8,\n")
    out = parse_samples(p, device_id="cow7", sample_period_ms=200, start_timestamp=1000)
    assert [s.timestamp for s in out] == [1000, 1200, 1400]
    assert {s.device_id for s in out} == {"cow7"}
    assert [s.label for s in out] == ["RES", "RUS", None]
    assert out[0].xyz == (0.1, 0.2, 0.9)


def test_parse_header_only_file(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("device_id,timestamp,acc_x,acc_y,acc_z,label\n")
    assert parse_samples(p) == []


def test_parse_routes_bad_rows_to_rejects(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("device_id,timestamp,acc_x,acc_y,acc_z,label\n"
                 "a,2,1,2,3,STN\n"
                 "a,1,oops,2,3,STN\n"
                 "a,3,1,2\n"
                 "b,0,1,2,3,REL\n")
    out = parse_samples(p)
    assert [s.key for s in out] == [("a", 2), ("b", 0)]
    rejects = (tmp_path / "s.rejects.csv").read_text().splitlines()
    assert rejects[0].startswith("line,reason,device_id")
    assert rejects[1].startswith("3,") and "oops" in rejects[1]
    assert rejects[2].startswith('4,"expected 6 fields, got 4"')


def test_parse_missing_columns(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("AccX,AccY,Label\n1,2,STN\n")
    with pytest.raises(SchemaError, match="acc_z"):
        parse_samples(p)
    p.write_text("AccX,AccY,AccZ\n1,2,3\n")
    with pytest.raises(SchemaError, match="device_id"):
        parse_samples(p)


def test_sample_csv_round_trip(tmp_path):
    src = synth_generate(SynthConfig(n_devices=2, duration_s=20), seed=1)
    write_samples(tmp_path / "s.csv", src)
    assert parse_samples(tmp_path / "s.csv") == src


# -- labels ------------------------------------------------------------------

@pytest.mark.parametrize("old,new", [("RES", "STN"), ("MOV", "STN"), ("RUS", "RUS"),
                                     ("REL", "REL"), ("DRN", "ETC"), ("FEP", "ETC"),
                                     ("URI", "ETC")])
def test_default_mapping(old, new):
    assert map_labels([Sample("d", 0, 0, 0, 1, old)])[0].label == new


def test_mapping_is_total_and_idempotent():
    assert set(BEHAVIOURS) <= set(DEFAULT_MAPPING)
    assert set(DEFAULT_MAPPING.values()) == set(CLASSES)
    once = map_labels([Sample("d", i, 0, 0, 1, c) for i, c in enumerate(BEHAVIOURS)])
    assert map_labels(once) == once


def test_mapping_preserves_rows_and_identity():
    src = [Sample("d", i, i, 0, 1, c) for i, c in enumerate(["RES", None, "LCK", "REL"])]
    out = map_labels(src)
    assert [s.key for s in out] == [s.key for s in src]
    assert [s.label for s in out] == ["STN", None, "ETC", "REL"]


def test_unknown_codes_listed():
    with pytest.raises(LabelMappingError, match="unknown label codes: FOO, XYZ") as exc:
        map_labels([Sample("d", 0, 0, 0, 1, "XYZ"), Sample("d", 1, 0, 0, 1, "FOO")])
    assert exc.value.codes == ["FOO", "XYZ"]


def test_load_mapping_override(tmp_path):
    p = tmp_path / "map.txt"
    p.write_text("# custom\nMOV=ETC\nLCK,STN\n\n")
    assert load_mapping(p) == {"MOV": "ETC", "LCK": "STN"}
    p.write_text("MOV=\n")
    with pytest.raises(ValueError):
        load_mapping(p)


def test_distribution_report():
    rows = label_distribution(["STN"] * 7 + ["REL"] * 2 + ["ETC"] + [None])
    assert rows[0] == ("STN", 7, 70.0)
    text = format_distribution(rows)
    assert text.splitlines()[0] == "class\tcount\tpercentage"
    assert "STN\t7\t70.00%" in text


def test_behaviour_counts_merge_to_class_shares():
    totals = {}
    for code, (n, _) in BEHAVIOURS.items():
        totals[DEFAULT_MAPPING[code]] = totals.get(DEFAULT_MAPPING[code], 0) + n
    grand = sum(totals.values())
    # published class shares were taken after cleaning, so raw counts land
    # within a few hundredths of a percent
    published = {"STN": 34.98, "RUS": 28.21, "REL": 18.89, "ETC": 17.9}
    for cls, pct in published.items():
        assert abs(100 * totals[cls] / grand - pct) < 0.05


# -- cleaning ----------------------------------------------------------------

def test_duplicates_collapsed():
    s = samples(3)
    out, rep = clean(s + [s[1]])
    assert len(out) == 3 and rep.duplicates_removed == 1


def test_single_gap_interpolated_at_midpoint():
    a = Sample("d", 0, 1.0, 1.0, 1.0, "STN")
    b = Sample("d", 400, 3.0, 3.0, 3.0, "STN")
    out, rep = clean([a, b], CleaningPolicy(sample_period_ms=200))
    assert [s.timestamp for s in out] == [0, 200, 400]
    assert out[1].acc_x == 2.0 and rep.rows_interpolated == 1


def test_long_gap_left_alone():
    s = samples(5) + samples(5, start=5 * 200 + 800)
    out, rep = clean(s)
    assert len(out) == 10 and rep.rows_interpolated == 0


def test_outlier_clamped():
    out, rep = clean([Sample("d", 0, 50.0, -20.0, 1.0, "STN")])
    assert out[0].xyz == (16.0, -16.0, 1.0) and rep.outliers_clamped == 2


def test_nonfinite_dropped_and_refilled():
    s = samples(5)
    s[2] = Sample("d", 400, float("nan"), 0.0, 1.0, "STN")
    out, rep = clean(s)
    assert rep.rows_dropped == 1 and rep.rows_interpolated == 1
    assert out[2].acc_x == 2.0


def test_cleaning_idempotent(rng):
    s = []
    for i in range(200):
        if rng.random() < 0.1:
            continue
        v = rng.normal(0, 10, 3)
        s.append(Sample("d", i * 200, *map(float, v), "STN"))
        if rng.random() < 0.05:
            s.append(s[-1])
    once, _ = clean(s)
    twice, rep = clean(once)
    assert twice == once
    assert rep.duplicates_removed == rep.rows_interpolated == rep.outliers_clamped == 0


def test_report_counts_consistent():
    s = samples(10)
    s = s[:4] + s[5:] + [s[0]]
    out, rep = clean(s)
    assert len(out) == len(s) - rep.duplicates_removed - rep.rows_dropped + rep.rows_interpolated


# -- gateway -----------------------------------------------------------------

def test_retransmit_deduplicated(tmp_path):
    pkts = packetize(samples(10), max_samples=5)
    write_packet_log(tmp_path / "g.bin", [pkts[0], pkts[1], pkts[0]])
    packets = read_packet_log(tmp_path / "g.bin")
    out, dupes = merge_packets(packets)
    assert out == samples(10) and dupes == 5


def test_out_of_order_upload_sorted(tmp_path):
    pkts = packetize(samples(30, "a") + samples(20, "b"), max_samples=7)
    write_packet_log(tmp_path / "g.bin", pkts[::-1])
    out = replay_gateway(tmp_path / "g.bin")
    keys = [s.key for s in out]
    assert keys == sorted(keys) and len(set(keys)) == 50


def test_last_write_wins(tmp_path):
    first = Packet("d", 0, (Sample("d", 0, 1.0, 0, 0, "STN"),))
    second = Packet("d", 0, (Sample("d", 0, 2.0, 0, 0, "REL"),))
    write_packet_log(tmp_path / "g.bin", [first, second])
    assert replay_gateway(tmp_path / "g.bin") == [Sample("d", 0, 2.0, 0, 0, "REL")]


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), n_dev=st.integers(1, 3), n=st.integers(1, 120),
       chunk=st.integers(1, 40))
def test_emit_replay_round_trip(tmp_path_factory, seed, n_dev, n, chunk):
    rng = np.random.default_rng(seed)
    src = []
    for d in range(n_dev):
        ts = np.sort(rng.choice(10 ** 6, n, replace=False))
        for t in ts:
            lbl = ALL_CODES[rng.integers(len(ALL_CODES))] if rng.random() < 0.8 else None
            src.append(Sample(f"cow{d}", int(t), *map(float, rng.normal(size=3)), lbl))
    sent = simulate_store_and_forward(packetize(src, chunk), seed, outage_prob=0.3,
                                      retransmit_prob=0.3)
    path = tmp_path_factory.mktemp("g") / "g.bin"
    write_packet_log(path, sent)
    assert replay_gateway(path) == sorted(src, key=lambda s: s.key)


def test_store_and_forward_reorders_and_repeats():
    pkts = packetize(samples(640), max_samples=8)
    sent = simulate_store_and_forward(pkts, seed=4, outage_prob=0.5, retransmit_prob=0.2)
    assert len(sent) > len(pkts)
    assert sent != pkts
    assert simulate_store_and_forward(pkts, seed=4, outage_prob=0.5,
                                      retransmit_prob=0.2) == sent


def test_packet_bytes_layout():
    pkt = Packet("ab", 1000, (Sample("ab", 1005, 1.0, 2.0, 3.0, "REL"),))
    raw = encode_packet(pkt)
    payload = raw[4:-4]
    assert struct.unpack("<I", raw[:4])[0] == len(payload) == 1 + 2 + 8 + 2 + 29
    assert struct.unpack("<I", raw[-4:])[0] == zlib.crc32(payload)
    assert payload[:3] == b"\x02ab"
    assert struct.unpack_from("<qH", payload, 3) == (1000, 1)
    assert struct.unpack_from("<IdddB", payload, 13) == (5, 1.0, 2.0, 3.0, 2)


def test_truncated_log_names_offset(tmp_path):
    write_packet_log(tmp_path / "g.bin", packetize(samples(10), 5))
    data = (tmp_path / "g.bin").read_bytes()
    (tmp_path / "t.bin").write_bytes(data[:-3])
    with pytest.raises(PacketError, match="truncated packet") as exc:
        read_packet_log(tmp_path / "t.bin")
    first_len = struct.unpack_from("<I", data, 8)[0]
    assert exc.value.offset == 8 + 4 + first_len + 4
    (tmp_path / "t.bin").write_bytes(data[:10])
    with pytest.raises(PacketError, match="byte offset 8"):
        read_packet_log(tmp_path / "t.bin")


def test_corrupt_log_rejected(tmp_path):
    write_packet_log(tmp_path / "g.bin", packetize(samples(3), 5))
    data = bytearray((tmp_path / "g.bin").read_bytes())
    data[20] ^= 0xFF
    (tmp_path / "c.bin").write_bytes(bytes(data))
    with pytest.raises(PacketError, match="checksum"):
        read_packet_log(tmp_path / "c.bin")
    (tmp_path / "m.bin").write_bytes(b"NOPE" + bytes(data[4:]))
    with pytest.raises(PacketError, match="magic"):
        read_packet_log(tmp_path / "m.bin")


# -- split -------------------------------------------------------------------

def label_table(counts: dict[str, int]) -> FeatureTable:
    labels = [c for c, n in counts.items() for _ in range(n)]
    n = len(labels)
    return FeatureTable(["f"], np.arange(n, dtype=float), [f"d{i % 5}" for i in range(n)],
                        np.arange(n), labels, [False] * n)


def test_balanced_split_sizes():
    t = label_table({c: 250 for c in CLASSES})
    train, val, test = stratified_split(t, seed=1)
    assert (len(train), len(val), len(test)) == (600, 200, 200)
    for part, want in ((train, 150), (val, 50), (test, 50)):
        assert all(np.sum(part.labels() == c) == want for c in CLASSES)


def test_split_disjoint_exhaustive_deterministic():
    t = label_table({"STN": 97, "REL": 41, "RUS": 13, "ETC": 3})
    parts = split_indices(t.labels(), seed=9)
    joined = np.concatenate(parts)
    assert sorted(joined) == list(range(len(t)))
    again = split_indices(t.labels(), seed=9)
    assert all(np.array_equal(a, b) for a, b in zip(parts, again))
    other = split_indices(t.labels(), seed=10)
    assert not all(np.array_equal(a, b) for a, b in zip(parts, other))


def test_split_class_ratios_within_one_row():
    counts = {"STN": 97, "REL": 41, "RUS": 13, "ETC": 3}
    t = label_table(counts)
    parts = stratified_split(t, seed=2)
    for c, n in counts.items():
        for part, r in zip(parts, (0.6, 0.2, 0.2)):
            assert abs(np.sum(part.labels() == c) - n * r) <= 1


def test_split_rejects_tiny_class():
    with pytest.raises(SplitError, match="'ETC'"):
        stratified_split(label_table({"STN": 10, "ETC": 2}))
    with pytest.raises(SplitError):
        split_indices(["a"] * 10, ratios=(0.5, 0.5, 0.5))


def test_group_split_keeps_devices_whole():
    t = label_table({c: 100 for c in CLASSES})
    parts = stratified_split(t, seed=3, group_by_device=True)
    devices = [set(p.device_id) for p in parts]
    assert all(devices) and not (devices[0] & devices[1] or devices[0] & devices[2]
                                 or devices[1] & devices[2])
    assert sum(len(p) for p in parts) == len(t)


# -- synthetic herd ----------------------------------------------------------

def test_synth_deterministic_and_sorted():
    cfg = SynthConfig(n_devices=2, duration_s=300)
    a, b = synth_generate(cfg, seed=5), synth_generate(cfg, seed=5)
    assert a == b
    assert a != synth_generate(cfg, seed=6)
    assert [s.key for s in a] == sorted(s.key for s in a)
    assert len(a) == 2 * 300 * 5


def test_synth_regime_geometry(small_herd):
    xyz = {c: np.array([s.xyz for s in small_herd if s.label == c]) for c in CLASSES}
    assert np.abs(xyz["REL"][:, 1]).mean() > np.abs(xyz["REL"][:, 2]).mean()
    assert np.abs(xyz["STN"][:, 2]).mean() > np.abs(xyz["STN"][:, 1]).mean()
    assert xyz["ETC"].std(axis=0).sum() > 3 * xyz["STN"].std(axis=0).sum()


def test_synth_rumination_energy_in_band():
    cfg = SynthConfig(n_devices=1, duration_s=600, bout_s=(600, 600),
                      regimes={"RUS": Regime((0, 0, 1), 0.03, (0.12, 0.2, 0.0), 1.0),
                               "STN": Regime((0, 0, 1), 0.03, weight=0.0)})
    y = np.array([s.acc_y for s in synth_generate(cfg, seed=1)])
    spectrum = np.abs(np.fft.rfft(y - y.mean())) ** 2
    freqs = np.fft.rfftfreq(y.size, d=1 / cfg.rate_hz)
    band = (freqs > 0.8) & (freqs < 1.2)
    assert spectrum[band].sum() > 0.8 * spectrum.sum()


def test_synth_rejects_bad_config():
    with pytest.raises(ParameterError):
        synth_generate(SynthConfig(bout_s=(0, 10)))
    with pytest.raises(ParameterError):
        synth_generate(SynthConfig(regimes={"STN": Regime((0, 0, 1), 0.1)}))
