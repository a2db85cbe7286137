import json
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from triplecoinc import tagio
from triplecoinc.coincidence import HistogramAxis
from triplecoinc.errors import ConfigInvalid, TagFileError
from triplecoinc.pipeline import build_histograms
from triplecoinc.tag_sim import DetectionStream, SimConfig, simulate


@pytest.mark.parametrize(
    "text,ps",
    [("500ps", 500), ("0.5ns", 500), ("0.5 ns", 500), ("2us", 2_000_000), ("1ms", 10**9),
     ("1e-3s", 10**9), ("3s", 3 * 10**12), ("750", 750), ("2µs", 2_000_000)],
)
def test_parse_duration(text, ps):
    assert tagio.parse_duration(text) == ps


def test_parse_duration_errors():
    for bad in ("", "5 parsecs", "ns", "1.2.3ps"):
        with pytest.raises(ConfigInvalid):
            tagio.parse_duration(bad)
    assert tagio.parse_duration("2", default_unit="s") == 2 * 10**12


timestamps = st.lists(st.integers(0, 2**40), max_size=50).map(lambda v: sorted(set(v)))


@given(st.lists(timestamps, min_size=1, max_size=4), st.integers(0, 2**20))
def test_tagfile_round_trip(tmp_path_factory, blocks, extra):
    duration = max([b[-1] for b in blocks if b] + [0]) + 1 + extra
    streams = [DetectionStream(c + 1, b, duration, {"collapsed": c}) for c, b in enumerate(blocks)]
    path = tmp_path_factory.mktemp("tags") / "t.ptt"
    tagio.write_tagfile(path, streams, {"rng_seed": 9})
    back, header = tagio.read_tagfile(path)
    assert back == streams
    assert header.duration == duration and header.meta["rng_seed"] == 9
    assert header.collapsed == sum(range(len(blocks)))


def test_tagfile_byte_layout(tmp_path):
    s1 = DetectionStream(1, [1, 2**33], 2**34)
    s2 = DetectionStream(7, [], 2**34)
    path = tmp_path / "x.ptt"
    tagio.write_tagfile(path, [s1, s2], {"note": "x"})
    raw = path.read_bytes()
    magic, ver, n, dur, coll, mlen = struct.unpack_from("<4sHHQQI", raw)
    assert (magic, ver, n, dur, coll) == (b"PTT1", 1, 2, 2**34, 0)
    meta = json.loads(raw[28:28 + mlen])
    assert meta["note"] == "x"
    pos = 28 + mlen
    assert struct.unpack_from("<HQHQ", raw, pos) == (1, 2, 7, 0)
    body = np.frombuffer(raw[pos + 20:], dtype="<u8")
    assert body.tolist() == [1, 2**33]


def test_tagfile_errors(tmp_path):
    p = tmp_path / "bad.ptt"
    p.write_bytes(b"NOPE" + bytes(40))
    with pytest.raises(TagFileError):
        tagio.read_tagfile(p)
    good = tmp_path / "good.ptt"
    tagio.write_tagfile(good, [DetectionStream(1, [1, 2, 3], 10)])
    good.write_bytes(good.read_bytes()[:-4])
    with pytest.raises(TagFileError):
        tagio.read_tagfile(good)
    with pytest.raises(TagFileError):
        tagio.write_tagfile(tmp_path / "u.ptt", [DetectionStream(1, [3, 1], 10)])
    with pytest.raises(TagFileError):
        tagio.write_tagfile(tmp_path / "o.ptt", [DetectionStream(1, [3, 10], 10)])
    with pytest.raises(TagFileError):
        tagio.write_tagfile(tmp_path / "d.ptt", [DetectionStream(1, [], 10), DetectionStream(2, [], 11)])
    with pytest.raises(OSError):
        tagio.read_tagfile(tmp_path / "missing.ptt")
    tagio.write_tagfile(good, [DetectionStream(1, [1, 2, 3], 10)])
    huge = bytearray(good.read_bytes())
    huge[-8:] = (2**63).to_bytes(8, "little")
    good.write_bytes(bytes(huge))
    with pytest.raises(TagFileError):
        tagio.read_tagfile(good)


def test_empty_simulation_round_trip(tmp_path):
    streams = simulate(SimConfig(sim_time=0.5))
    tagio.write_tagfile(tmp_path / "e.ptt", streams)
    back, header = tagio.read_tagfile(tmp_path / "e.ptt")
    assert [len(s) for s in back] == [0, 0, 0] and header.duration == 5 * 10**11


def test_matrix_csv_format(tmp_path):
    axis = HistogramAxis.centered(500, 2)
    m = np.arange(25, dtype=float).reshape(5, 5) / 3
    m[0, 0] = np.nan
    tagio.write_matrix_csv(tmp_path / "m.csv", axis, m)
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "tau12_ps\\tau13_ps,-1000,-500,0,500,1000"
    assert lines[1].split(",")[:2] == ["-1000", ""]
    assert all(len(line.split(",")) == 6 for line in lines)
    assert "," not in tagio.fmt_number(1234567.5) and "e" in tagio.fmt_number(1e-30)
    taus, back = tagio.read_matrix_csv(tmp_path / "m.csv")
    assert taus.tolist() == [-1000, -500, 0, 500, 1000]
    assert np.isnan(back[0, 0])
    assert np.array_equal(back[1:], m[1:]) and np.array_equal(back[0, 1:], m[0, 1:])
    ints = np.arange(25).reshape(5, 5)
    tagio.write_matrix_csv(tmp_path / "i.csv", axis, ints)
    _, back = tagio.read_matrix_csv(tmp_path / "i.csv")
    assert back.dtype == np.int64 and np.array_equal(back, ints)


def test_histogram_bundle_round_trip(tmp_path):
    cfg = SimConfig(pair_rate=2e4, background=1e4, triplet_rate=50, sim_time=1, rng_seed=2)
    hists = build_histograms(simulate(cfg), HistogramAxis.centered(500, 6))
    tagio.write_histogram_bundle(tmp_path, hists)
    back = tagio.read_histogram_bundle(tmp_path)
    assert back.singles.rates == hists.singles.rates
    assert back.triple.axis == hists.triple.axis
    assert np.array_equal(back.triple.counts, hists.triple.counts)
    for key in hists.pairs:
        assert np.array_equal(back.pairs[key].counts, hists.pairs[key].counts)
    assert np.array_equal(back.diagonal_23.counts, hists.diagonal_23.counts)
    lines = (tmp_path / "pair_12.csv").read_text().splitlines()
    assert lines[0] == "tau_ps,counts,rate_per_s" and len(lines) == 14


def test_stream_csv(tmp_path):
    tagio.export_stream_csv(tmp_path / "c.csv", DetectionStream(1, [5, 2**40], 2**41))
    assert (tmp_path / "c.csv").read_text() == "timestamp_ps\n5\n1099511627776\n"


CONFIG = """
[source]
pair_rate = 1000      # pairs per second
triplet_rate = 0
corr_sigma = 100ps
eta = 0.3, 0.3, 0.3
[detectors]
background = 1e4
dead_time = 0, 20ns, 0
[simulation]
sim_time = 2s
rng_seed = 17
[analysis]
bin_width = 0.5ns
tau_max = 10ns
exclusion_radius = 3
[coarse_grain]
t_pix = 2ns
strip_halfwidth = 1
window = 5ns
[output]
directory = results
"""


def test_run_config(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text(CONFIG)
    run = tagio.load_run_config(p)
    assert run.sim.pair_rate == 1000 and run.sim.rng_seed == 17
    assert run.sim.corr_sigma == pytest.approx(100e-12)
    assert run.sim.background == (1e4, 1e4, 1e4)
    assert run.sim.dead_time == (0, pytest.approx(20e-9), 0)
    a = run.analysis
    assert (a.bin_width, a.n_side, a.t_pix, a.strip_halfwidth, a.window_n_side, a.exclusion_radius) == (500, 20, 2000, 1, 10, 3)
    assert run.output_dir == "results"


@pytest.mark.parametrize(
    "patch",
    [("eta = 0.3, 0.3, 0.3", "eta = 0.5, 0.5, 0.5"), ("[source]", "[sauce]"), ("pair_rate", "pair_rat"),
     ("sim_time = 2s", "sim_time = soon"), ("eta = 0.3, 0.3, 0.3", "eta = 0.3, 0.3")],
)
def test_run_config_errors(tmp_path, patch):
    p = tmp_path / "run.ini"
    p.write_text(CONFIG.replace(*patch))
    with pytest.raises(ConfigInvalid):
        tagio.load_run_config(p)
