"""Command-line pipeline: simulate, histogram, normalize, coarsegrain, predict, export-csv.

Exit codes: 0 ok, 2 invalid input or configuration, 3 I/O failure. Errors are
written to stderr as a single JSON object ``{"error": code, "message": ...}``.
Default output locations live under ``$TRIPLECOINC_OUT`` (or ``./triplecoinc_out``).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import fock_oracle as fo
from . import tagio
from .background import normalized_g3, peak_significance
from .coarse_grain import PixelSpec, RegionPartition, central_window, coarse_grain, group_poisson_sigma
from .coincidence import HistogramAxis
from .errors import ConfigInvalid, MaskedCenter, TripleCoincError
from .pipeline import AnalysisConfig, analyze_histograms, build_histograms, model_from_histograms
from .tag_sim import RNG_ALGORITHM, simulate

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 2, 3
ENV_OUT = "TRIPLECOINC_OUT"


class CliError(Exception):
    def __init__(self, exit_code: int, code: str, message: str):
        super().__init__(message)
        self.exit_code, self.code = exit_code, code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_INVALID, "usage", f"{self.prog}: {message}")


def default_out(name: str) -> Path:
    return Path(os.environ.get(ENV_OUT, "triplecoinc_out")) / name


def _duration(text: str) -> int:
    try:
        return tagio.parse_duration(text)
    except ConfigInvalid as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _say(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


# subcommands


def cmd_simulate(args) -> None:
    run = tagio.load_run_config(args.config)
    sim = run.sim if args.seed is None else replace(run.sim, rng_seed=args.seed)
    out = Path(args.out) if args.out else (Path(run.output_dir) / "tags.ptt" if run.output_dir else default_out("tags.ptt"))
    streams = simulate(sim)
    out.parent.mkdir(parents=True, exist_ok=True)
    tagio.write_tagfile(out, streams, {"rng_algorithm": RNG_ALGORITHM, "rng_seed": sim.rng_seed, "config": sim.to_dict()})
    _say({
        "tagfile": str(out),
        "duration_s": sim.sim_time,
        "channels": [
            {"channel": s.channel, "counts": len(s), "rate_per_s": len(s) / s.duration_s}
            for s in streams
        ],
    })


def _analysis_from_args(args, bin_width: int, n_side: int) -> AnalysisConfig:
    return AnalysisConfig(
        bin_width=bin_width,
        n_side=n_side,
        exclusion_radius=args.exclusion_radius,
        outside=args.outside,
        floor=args.floor,
    )


def cmd_histogram(args) -> None:
    streams, header = tagio.read_tagfile(args.tags)
    by_ch = {s.channel: s for s in streams}
    if sorted(by_ch) != [1, 2, 3]:
        raise ConfigInvalid(f"tag file must hold channels 1, 2, 3; found {sorted(by_ch)}")
    if args.taumax < args.dt:
        raise ConfigInvalid("--taumax must be at least --dt")
    axis = HistogramAxis.centered(args.dt, args.taumax // args.dt)
    hists = build_histograms([by_ch[1], by_ch[2], by_ch[3]], axis)
    out = Path(args.out) if args.out else default_out("histograms")
    tagio.write_histogram_bundle(out, hists, {"source": {"rng_seed": header.meta.get("rng_seed"), "collapsed": header.collapsed}})
    _say({
        "out": str(out),
        "bins": axis.n_bins,
        "tau_max_ps": axis.tau_max,
        "triples_total": int(hists.triple.counts.sum()),
        "pairs_total": {f"{i}{j}": int(h.counts.sum()) for (i, j), h in sorted(hists.pairs.items())},
    })


def _summary(normalized, sigma=None) -> dict:
    vals = normalized.unmasked()
    out = {
        "g3n_center": normalized.center(),
        "g3n_mean": float(np.mean(vals)) if vals.size else None,
        "masked_bins": int(normalized.mask.sum()),
        "bins": int(normalized.mask.size),
    }
    try:
        out["center_p_value"] = peak_significance(normalized)
    except MaskedCenter:
        out["center_p_value"] = None
    if sigma is not None:
        ok = ~normalized.mask & np.isfinite(sigma)
        z = (normalized.values[ok] - 1.0) / sigma[ok]
        out["max_z"] = float(z.max()) if z.size else None
    return out


def cmd_normalize(args) -> None:
    hists = tagio.read_histogram_bundle(args.hists)
    axis = hists.triple.axis
    cfg = _analysis_from_args(args, axis.bin_width, axis.n_side)
    res = analyze_histograms(hists, cfg)
    out = Path(args.out) if args.out else default_out("normalized")
    out.mkdir(parents=True, exist_ok=True)
    for name, comp in res.model.components().items():
        tagio.write_matrix_csv(out / f"model_{name}.csv", axis, comp)
    tagio.write_matrix_csv(out / "model_total.csv", axis, res.model.values)
    tagio.write_matrix_csv(out / "expected_counts.csv", axis, res.expected_counts)
    tagio.write_matrix_csv(out / "g3n.csv", axis, res.normalized.values)
    summary = _summary(res.normalized, res.sigma)
    summary.update({
        "model_flat_per_s": res.model.flat,
        "units": "model_*.csv in coincidences per second per bin; g3n dimensionless; empty cells masked",
        "analysis": tagio.analysis_config_dict(cfg),
    })
    tagio.write_json(out / "normalize.json", summary)
    _say({"out": str(out), **{k: summary[k] for k in ("g3n_center", "g3n_mean", "masked_bins", "center_p_value")}})


def cmd_coarsegrain(args) -> None:
    hists = tagio.read_histogram_bundle(getattr(args, "in"))
    axis = hists.triple.axis
    window = hists.triple
    if args.window is not None:
        window = central_window(hists.triple, args.window)
    spec = PixelSpec(args.pixel, axis.bin_width)
    partition = RegionPartition.build(window.axis.n_side, args.strip)
    coarse = coarse_grain(window, partition, spec)
    _, model = model_from_histograms(
        hists.singles, hists.pairs, axis, args.exclusion_radius, args.outside, hists.diagonal_23
    )
    model = model.cropped(window.axis)
    normalized = normalized_g3(coarse.histogram, model, args.floor)
    sigma = group_poisson_sigma(coarse, model.values * window.duration_s)

    out = Path(args.out) if args.out else default_out("coarse")
    out.mkdir(parents=True, exist_ok=True)
    tagio.write_matrix_csv(out / "coarse_counts.csv", window.axis, coarse.histogram.counts)
    tagio.write_matrix_csv(out / "g3n_coarse.csv", window.axis, normalized.values)
    tagio.write_matrix_csv(out / "sigma.csv", window.axis, np.where(normalized.mask, np.nan, sigma))
    tagio.write_matrix_csv(out / "groups.csv", window.axis, coarse.groups)
    summary = _summary(normalized, sigma)
    summary.update({
        "axis": window.axis.to_dict(),
        "duration_ps": window.duration,
        "t_pix_ps": spec.t_pix,
        "bins_per_pixel": spec.bins_per_pixel,
        "partial_edge_pixel": coarse.partial_edge,
        "partition": partition.describe(),
    })
    tagio.write_json(out / "coarse.json", summary)
    _say({"out": str(out), **{k: summary[k] for k in ("g3n_center", "g3n_mean", "masked_bins")}})


def cmd_predict(args) -> None:
    report = fo.classify_regime(args.gamma2, args.beta2, args.margin)
    params = fo.PdcParams(gamma=np.sqrt(args.gamma2), beta=np.sqrt(args.beta2))
    _say({
        "g2_seed": fo.g2_seed(params),
        "g3_seed": fo.g3_seed(params),
        "g3n_peak": fo.predicted_g3n_peak(),
        "regime": report.as_dict(),
    })


def cmd_export_csv(args) -> None:
    streams, _ = tagio.read_tagfile(args.tags)
    out = Path(args.out) if args.out else default_out("csv")
    out.mkdir(parents=True, exist_ok=True)
    for s in streams:
        tagio.export_stream_csv(out / f"channel_{s.channel}.csv", s)
    _say({"out": str(out), "files": [f"channel_{s.channel}.csv" for s in streams]})


def _add_model_flags(p) -> None:
    p.add_argument("--exclusion-radius", type=int, default=5, help="bins around tau=0 kept in each pair profile")
    p.add_argument("--outside", choices=("zero", "clamp", "keep"), default="zero")
    p.add_argument("--floor", type=float, default=None, help="mask bins whose model rate (1/s) is below this")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="triplecoinc", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="Monte-Carlo detection streams to a tag file")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("histogram", help="pair and three-fold histograms from a tag file")
    p.add_argument("--tags", required=True)
    p.add_argument("--dt", type=_duration, default=500)
    p.add_argument("--taumax", type=_duration, default=10_000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_histogram)

    p = sub.add_parser("normalize", help="accidental model and normalized map")
    p.add_argument("--hists", required=True)
    p.add_argument("--out")
    _add_model_flags(p)
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("coarsegrain", help="region averages and ridge pixels")
    p.add_argument("--in", required=True)
    p.add_argument("--pixel", type=_duration, required=True)
    p.add_argument("--window", type=_duration, default=None, help="central window tau_max")
    p.add_argument("--strip", type=int, default=2, help="strip half-width in bins")
    p.add_argument("--out")
    _add_model_flags(p)
    p.set_defaults(func=cmd_coarsegrain)

    p = sub.add_parser("predict", help="weak-seed correlators and regime check")
    p.add_argument("--gamma2", type=float, required=True)
    p.add_argument("--beta2", type=float, required=True)
    p.add_argument("--margin", type=float, default=fo.DEFAULT_MARGIN)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("export-csv", help="one timestamp CSV per channel")
    p.add_argument("--tags", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_csv)
    return ap


def _classify(exc: BaseException) -> CliError:
    if isinstance(exc, CliError):
        return exc
    code = getattr(exc, "code", None) or type(exc).__name__
    if isinstance(exc, OSError):
        return CliError(EXIT_IO, code if isinstance(exc, TripleCoincError) else "io_error", str(exc))
    return CliError(EXIT_INVALID, str(code), str(exc))


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except (CliError, TripleCoincError, ValueError, OverflowError, OSError, KeyError) as exc:
        err = _classify(exc)
        sys.stderr.write(json.dumps({"error": err.code, "message": str(err)}) + "\n")
        return err.exit_code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
