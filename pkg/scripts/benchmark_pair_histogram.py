"""Time the two-pointer pair histogram against stream size."""
import argparse
import time
import tracemalloc

import numpy as np

from triplecoinc.coincidence import HistogramAxis, pair_histogram
from triplecoinc.tag_sim import DetectionStream


def run(n, rate, rng, axis):
    duration = int(n / rate * 1e12)
    a = DetectionStream(1, np.sort(rng.integers(0, duration, size=n)), duration)
    b = DetectionStream(2, np.sort(rng.integers(0, duration, size=n)), duration)
    tracemalloc.start()
    t0 = time.perf_counter()
    h = pair_histogram(a, b, axis)
    elapsed = time.perf_counter() - t0
    peak = tracemalloc.get_traced_memory()[1]
    tracemalloc.stop()
    return elapsed, int(h.counts.sum()), peak, a.timestamps.nbytes + b.timestamps.nbytes


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=float, nargs="+", default=[1e5, 1e6, 1e7])
    ap.add_argument("--rate", type=float, default=2.5e3, help="events per second per channel")
    ap.add_argument("--n-side", type=int, default=20)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    axis = HistogramAxis.centered(500, args.n_side)
    run(1000, args.rate, rng, axis)  # compile
    print(f"{'events':>10} {'seconds':>8} {'Mev/s':>7} {'matches':>9} {'peak MiB':>9} {'input MiB':>9}")
    for size in args.sizes:
        n = int(size)
        elapsed, matches, peak, nbytes = run(n, args.rate, rng, axis)
        print(f"{n:>10d} {elapsed:8.3f} {2 * n / elapsed / 1e6:7.1f} {matches:9d} "
              f"{peak / 2**20:9.1f} {nbytes / 2**20:9.1f}")


if __name__ == "__main__":
    main()
