"""Seed-stimulated triplet run calibrated to the predicted central excess.

The triplet rate is chosen so that genuine central triples are 9x the
accidental central rate, i.e. g3n(0,0) should come out near 10. Prints the
measured central value, its Poisson p-value and the three cross sections.
"""
import argparse
from dataclasses import replace

import numpy as np

from triplecoinc.background import peak_significance
from triplecoinc.coarse_grain import cross_sections
from triplecoinc.coincidence import TripleHistogram
from triplecoinc.fock_oracle import predicted_g3n_peak
from triplecoinc.pipeline import AnalysisConfig, analyze
from triplecoinc.tag_sim import SimConfig, calibrate_triplet_rate, expected_central_rates, simulate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pair-rate", type=float, default=2e4)
    ap.add_argument("--background", type=float, default=1e4)
    ap.add_argument("--sim-time", type=float, default=400.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n-side", type=int, default=20)
    ap.add_argument("--t-pix", type=int, default=2000)
    args = ap.parse_args()

    dt = 500
    base = SimConfig(pair_rate=args.pair_rate, eta=(0.3,) * 3, background=(args.background,) * 3,
                     corr_sigma=100e-12, sim_time=args.sim_time, rng_seed=args.seed)
    target = predicted_g3n_peak() - 1
    cfg = replace(base, triplet_rate=calibrate_triplet_rate(base, dt * 1e-12, target))
    exp = expected_central_rates(cfg, dt * 1e-12)
    print(f"triplet rate {cfg.triplet_rate:.4f}/s, expected central counts "
          f"{(exp.triplet_center + exp.accidental_center) * cfg.sim_time:.1f}, "
          f"predicted g3n(0,0) {exp.g3n_center:.3f}")

    res = analyze(simulate(cfg), AnalysisConfig(bin_width=dt, n_side=args.n_side, t_pix=args.t_pix,
                                                strip_halfwidth=1, exclusion_radius=1))
    g = res.normalized
    print(f"measured g3n(0,0) {g.center():.3f}, p-value {peak_significance(g):.3e}")
    print("delays (ps):", g.axis.centers.tolist())
    with np.printoptions(precision=2, suppress=True, linewidth=160):
        for name, line in cross_sections(TripleHistogram(g.axis, g.values, res.window.duration)).items():
            print(f"{name}: {line}")


if __name__ == "__main__":
    main()
