"""On-disk formats: binary tag files, CSV/JSON histogram bundles, run configs.

Tag file layout (all integers little-endian)::

    magic        4 bytes  b"PTT1"
    version      u16      currently 1
    n_channels   u16
    duration     u64      ps; every timestamp is < duration
    collapsed    u64      same-picosecond duplicates merged by the simulator
    meta_len     u32
    meta         meta_len bytes of UTF-8 JSON (RNG algorithm, seed, per-channel notes)
    n_channels x (channel id u16, event count u64)
    n_channels blocks of u64 timestamps (ps), in header order
"""
from __future__ import annotations

import configparser
import csv
import io
import json
import re
import struct
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .coincidence import HistogramAxis, PairHistogram, SinglesRates, TripleHistogram
from .errors import ConfigInvalid, TagFileError
from .pipeline import AnalysisConfig, Histograms
from .tag_sim import PS_PER_S, DetectionStream, SimConfig

MAGIC = b"PTT1"
VERSION = 1
_HEAD = struct.Struct("<4sHHQQI")
_CHANNEL = struct.Struct("<HQ")

_UNITS = {"ps": 1, "ns": 10**3, "us": 10**6, "µs": 10**6, "ms": 10**9, "s": 10**12}
_DURATION_RE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([a-zµ]*)\s*$")


def parse_duration(text, default_unit: str = "ps") -> int:
    """'500ps', '0.5 ns', '2us', '1e-3s' -> integer picoseconds."""
    if isinstance(text, (int, float)):
        return int(round(text * _UNITS[default_unit]))
    m = _DURATION_RE.match(str(text))
    if not m:
        raise ConfigInvalid(f"cannot parse duration {text!r}")
    unit = m.group(2) or default_unit
    if unit not in _UNITS:
        raise ConfigInvalid(f"unknown time unit {unit!r} in {text!r}")
    return int(round(float(m.group(1)) * _UNITS[unit]))


def fmt_number(x) -> str:
    """Locale-independent, round-trippable text for CSV cells."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if np.isnan(x):
        return ""
    return repr(x)


# tag files


def write_tagfile(path, streams, meta: dict | None = None) -> None:
    streams = list(streams)
    if not streams:
        raise TagFileError("no streams to write")
    durations = {s.duration for s in streams}
    if len(durations) != 1:
        raise TagFileError("streams must share one duration")
    duration = durations.pop()
    for s in streams:
        if not s.is_sorted():
            raise TagFileError(f"channel {s.channel} is not sorted")
        if len(s) and (s.timestamps[0] < 0 or s.timestamps[-1] >= duration):
            raise TagFileError(f"channel {s.channel} has timestamps outside [0, duration)")
    meta = dict(meta or {})
    meta.setdefault("channels", {str(s.channel): s.meta for s in streams})
    for key in ("rng_algorithm", "rng_seed"):
        vals = {s.meta.get(key) for s in streams}
        if len(vals) == 1 and None not in vals:
            meta.setdefault(key, vals.pop())
    collapsed = sum(int(s.meta.get("collapsed", 0)) for s in streams)
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_HEAD.pack(MAGIC, VERSION, len(streams), duration, collapsed, len(blob)))
        fh.write(blob)
        for s in streams:
            fh.write(_CHANNEL.pack(s.channel, len(s)))
        for s in streams:
            fh.write(s.timestamps.astype("<u8").tobytes())


@dataclass
class TagFileHeader:
    version: int
    duration: int
    collapsed: int
    meta: dict
    channels: list = field(default_factory=list)


def read_tagfile(path) -> tuple[list[DetectionStream], TagFileHeader]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEAD.size or raw[:4] != MAGIC:
        raise TagFileError(f"{path}: not a PTT1 tag file")
    magic, version, n_ch, duration, collapsed, meta_len = _HEAD.unpack_from(raw, 0)
    if version != VERSION:
        raise TagFileError(f"{path}: unsupported version {version}")
    pos = _HEAD.size
    try:
        meta = json.loads(raw[pos:pos + meta_len].decode("utf-8"))
    except ValueError as exc:
        raise TagFileError(f"{path}: corrupt metadata") from exc
    pos += meta_len
    table = []
    for _ in range(n_ch):
        table.append(_CHANNEL.unpack_from(raw, pos))
        pos += _CHANNEL.size
    expected = pos + 8 * sum(n for _, n in table)
    if len(raw) != expected:
        raise TagFileError(f"{path}: size {len(raw)} does not match header ({expected})")
    ch_meta = meta.get("channels", {})
    streams = []
    for ch, n in table:
        raw_ts = np.frombuffer(raw, dtype="<u8", count=n, offset=pos)
        if n and raw_ts.max() >= 2**63:
            raise TagFileError(f"{path}: channel {ch} timestamp beyond the signed 64-bit range")
        ts = raw_ts.astype(np.int64)
        pos += 8 * n
        streams.append(DetectionStream(ch, ts, duration, dict(ch_meta.get(str(ch), {}))))
    return streams, TagFileHeader(version, duration, collapsed, meta, [ch for ch, _ in table])


def export_stream_csv(path, stream: DetectionStream) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("timestamp_ps\n")
        fh.write("\n".join(str(int(t)) for t in stream.timestamps))
        if len(stream):
            fh.write("\n")


# histogram bundles


def write_matrix_csv(path, axis: HistogramAxis, matrix) -> None:
    """Header row: corner label then tau_13 centers (ps); each row starts with tau_12."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    centers = axis.centers
    w.writerow(["tau12_ps\\tau13_ps", *(str(int(c)) for c in centers)])
    for c, row in zip(centers, np.asarray(matrix)):
        w.writerow([str(int(c)), *(fmt_number(v) for v in row)])
    Path(path).write_text(buf.getvalue())


def read_matrix_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Returns (tau centers in ps, matrix). Empty cells come back as NaN."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    taus = np.array([int(v) for v in rows[0][1:]], dtype=np.int64)
    cells = [r[1:] for r in rows[1:]]
    if any(len(r) != len(taus) for r in cells):
        raise TagFileError(f"{path}: matrix is not rectangular")
    is_int = all(v and re.fullmatch(r"-?\d+", v) for r in cells for v in r)
    if is_int:
        return taus, np.array([[int(v) for v in r] for r in cells], dtype=np.int64)
    return taus, np.array([[float(v) if v else np.nan for v in r] for r in cells], dtype=float)


def write_pair_csv(path, hist: PairHistogram) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tau_ps", "counts", "rate_per_s"])
    for c, n, r in zip(hist.axis.centers, hist.counts, hist.rate_per_bin):
        w.writerow([str(int(c)), fmt_number(n), fmt_number(r)])
    Path(path).write_text(buf.getvalue())


def read_pair_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    taus = np.array([int(r[0]) for r in rows], dtype=np.int64)
    raw = [r[1] for r in rows]
    if all(re.fullmatch(r"-?\d+", v) for v in raw):
        return taus, np.array([int(v) for v in raw], dtype=np.int64)
    return taus, np.array([float(v) for v in raw])


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def _pair_name(i, j, binning="nearest"):
    return f"pair_{i}{j}.csv" if binning == "nearest" else f"pair_{i}{j}_{binning}.csv"


def write_histogram_bundle(directory, hists: Histograms, extra: dict | None = None) -> None:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    axis = hists.triple.axis
    files = {}
    for (i, j), h in sorted(hists.pairs.items()):
        files[f"pair_{i}{j}"] = _pair_name(i, j)
        write_pair_csv(out / files[f"pair_{i}{j}"], h)
    if hists.diagonal_23 is not None:
        files["pair_23_linear"] = _pair_name(2, 3, "linear")
        write_pair_csv(out / files["pair_23_linear"], hists.diagonal_23)
    files["triple"] = "triple.csv"
    write_matrix_csv(out / "triple.csv", axis, hists.triple.counts)
    meta = {
        "axis": axis.to_dict(),
        "duration_ps": hists.triple.duration,
        "singles_per_s": list(hists.singles.rates),
        "singles_counts": [int(round(r * hists.singles.duration / PS_PER_S)) for r in hists.singles.rates],
        "files": files,
        "delay_convention": "tau_ij = t_i - t_j; triple rows tau_12, columns tau_13",
    }
    meta.update(extra or {})
    write_json(out / "histograms.json", meta)


def read_histogram_bundle(directory) -> Histograms:
    src = Path(directory)
    meta = read_json(src / "histograms.json")
    ax = meta["axis"]
    axis = HistogramAxis(ax["bin_width_ps"], ax["tau_max_ps"])
    duration = int(meta["duration_ps"])
    counts = meta.get("singles_counts")
    if counts is not None:
        rates = tuple(c / (duration / PS_PER_S) for c in counts)
    else:
        rates = tuple(meta["singles_per_s"])
    singles = SinglesRates(rates, duration)
    pairs = {}
    for key in ("12", "13", "23"):
        _, c = read_pair_csv(src / meta["files"][f"pair_{key}"])
        pairs[(int(key[0]), int(key[1]))] = PairHistogram((int(key[0]), int(key[1])), axis, c, duration)
    diagonal = None
    if "pair_23_linear" in meta["files"]:
        _, c = read_pair_csv(src / meta["files"]["pair_23_linear"])
        diagonal = PairHistogram((2, 3), axis, c, duration, "linear")
    _, m = read_matrix_csv(src / meta["files"]["triple"])
    return Histograms(singles, pairs, TripleHistogram(axis, m, duration), diagonal)


# run configuration (INI dialect)


@dataclass
class RunConfig:
    sim: SimConfig
    analysis: AnalysisConfig
    output_dir: str | None = None


def _triple(text, conv):
    parts = [p for p in re.split(r"[,\s]+", str(text).strip()) if p]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3:
        raise ConfigInvalid(f"expected 1 or 3 values, got {text!r}")
    return tuple(conv(p) for p in parts)


def _seconds(text) -> float:
    return parse_duration(text, default_unit="s") / PS_PER_S


def load_run_config(path) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigInvalid(f"{path}: {exc}") from exc
    try:
        return _build_run_config(cp)
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ConfigInvalid):
            raise
        raise ConfigInvalid(f"{path}: {exc}") from exc


def _build_run_config(cp: configparser.ConfigParser) -> RunConfig:
    known = {
        "source": {"pair_rate", "triplet_rate", "corr_sigma", "eta"},
        "detectors": {"background", "dead_time"},
        "simulation": {"sim_time", "rng_seed", "event_cap"},
        "analysis": {"bin_width", "tau_max", "exclusion_radius", "outside", "floor"},
        "coarse_grain": {"t_pix", "strip_halfwidth", "window"},
        "output": {"directory"},
    }
    for section in cp.sections():
        if section not in known:
            raise ConfigInvalid(f"unknown section [{section}]")
        extra = set(cp[section]) - known[section]
        if extra:
            raise ConfigInvalid(f"unknown keys in [{section}]: {sorted(extra)}")

    def get(section, key, default=None):
        if cp.has_option(section, key):
            return cp.get(section, key)
        return default

    sim_kwargs = {}
    if (v := get("source", "pair_rate")) is not None:
        sim_kwargs["pair_rate"] = float(v)
    if (v := get("source", "triplet_rate")) is not None:
        sim_kwargs["triplet_rate"] = float(v)
    if (v := get("source", "corr_sigma")) is not None:
        sim_kwargs["corr_sigma"] = _seconds(v)
    if (v := get("source", "eta")) is not None:
        sim_kwargs["eta"] = _triple(v, float)
    if (v := get("detectors", "background")) is not None:
        sim_kwargs["background"] = _triple(v, float)
    if (v := get("detectors", "dead_time")) is not None:
        sim_kwargs["dead_time"] = _triple(v, _seconds)
    if (v := get("simulation", "sim_time")) is not None:
        sim_kwargs["sim_time"] = _seconds(v)
    if (v := get("simulation", "rng_seed")) is not None:
        sim_kwargs["rng_seed"] = int(v)
    if (v := get("simulation", "event_cap")) is not None:
        sim_kwargs["event_cap"] = float(v)
    sim = SimConfig(**sim_kwargs)

    bin_width = parse_duration(get("analysis", "bin_width", "500ps"))
    tau_max = parse_duration(get("analysis", "tau_max", "10ns"))
    an = {"bin_width": bin_width, "n_side": max(1, tau_max // bin_width)}
    if (v := get("analysis", "exclusion_radius")) is not None:
        an["exclusion_radius"] = int(v)
    if (v := get("analysis", "outside")) is not None:
        an["outside"] = v.strip()
    if (v := get("analysis", "floor")) is not None and v.strip():
        an["floor"] = float(v)
    if (v := get("coarse_grain", "t_pix")) is not None:
        an["t_pix"] = parse_duration(v)
    if (v := get("coarse_grain", "strip_halfwidth")) is not None:
        an["strip_halfwidth"] = int(v)
    if (v := get("coarse_grain", "window")) is not None:
        an["window_n_side"] = parse_duration(v) // bin_width
    return RunConfig(sim, AnalysisConfig(**an), get("output", "directory"))


def analysis_config_dict(cfg: AnalysisConfig) -> dict:
    return {f.name: getattr(cfg, f.name) for f in fields(cfg)}
