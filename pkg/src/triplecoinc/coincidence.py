"""Singles rates, two-fold delay histograms and the three-fold delay map.

Coincidence semantics are *all partners*: every (t_i, t_j) with
|t_i - t_j| < tau_max is counted, not just the nearest neighbour. Delays are
tau_ij = t_i - t_j; the three-fold map is indexed [k, l] with k the bin of
tau_12 = t1 - t2 and l the bin of tau_13 = t1 - t3.

A delay tau goes to bin k = floor((tau + dt/2) / dt): bin k covers
[(k - 1/2) dt, (k + 1/2) dt), so a delay sitting exactly on an edge belongs
to the bin above it. Delays whose bin falls outside [-K, K] are dropped.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._kernels import pair_histogram_kernel, pair_histogram_linear_kernel, triple_histogram_kernel
from .errors import AxisMismatch, DurationMismatch, UnsortedInput, WindowTooLarge
from .tag_sim import PS_PER_S, DetectionStream


@dataclass(frozen=True)
class HistogramAxis:
    """Bins centered on k * bin_width for k in [-K, K], K = tau_max // bin_width."""

    bin_width: int
    tau_max: int

    def __post_init__(self):
        object.__setattr__(self, "bin_width", int(self.bin_width))
        object.__setattr__(self, "tau_max", int(self.tau_max))
        if self.bin_width <= 0:
            raise ValueError("bin_width must be > 0")
        if self.tau_max < self.bin_width:
            raise ValueError("tau_max must be >= bin_width")

    @classmethod
    def centered(cls, bin_width: int, n_side: int) -> "HistogramAxis":
        """Axis whose window |tau| < tau_max covers bins -K..K completely."""
        bin_width = int(bin_width)
        if bin_width < 3:
            return cls(bin_width, n_side * bin_width + bin_width - 1)
        return cls(bin_width, n_side * bin_width + bin_width // 2 + 1)

    @property
    def n_side(self) -> int:
        return self.tau_max // self.bin_width

    @property
    def n_bins(self) -> int:
        return 2 * self.n_side + 1

    @property
    def bin_indices(self) -> np.ndarray:
        return np.arange(-self.n_side, self.n_side + 1)

    @property
    def centers(self) -> np.ndarray:
        """Bin centers in ps."""
        return self.bin_indices * self.bin_width

    @property
    def bin_width_s(self) -> float:
        return self.bin_width / PS_PER_S

    def bin_of(self, tau):
        tau = np.asarray(tau, dtype=np.int64)
        return np.floor_divide(2 * tau + self.bin_width, 2 * self.bin_width)

    def to_dict(self) -> dict:
        return {"bin_width_ps": self.bin_width, "tau_max_ps": self.tau_max, "n_side": self.n_side}


@dataclass(frozen=True)
class SinglesRates:
    rates: tuple[float, float, float]
    duration: int

    @property
    def r1(self):
        return self.rates[0]

    @property
    def r2(self):
        return self.rates[1]

    @property
    def r3(self):
        return self.rates[2]

    def of(self, channel: int) -> float:
        return self.rates[channel - 1]


@dataclass(frozen=True, eq=False)
class PairHistogram:
    """Two-fold delay histogram; ``counts`` is float for linear binning."""

    channels: tuple[int, int]
    axis: HistogramAxis
    counts: np.ndarray
    duration: int
    binning: str = "nearest"

    @property
    def duration_s(self) -> float:
        return self.duration / PS_PER_S

    @property
    def rate_per_bin(self) -> np.ndarray:
        return self.counts / self.duration_s


@dataclass(frozen=True, eq=False)
class TripleHistogram:
    """Three-fold map; ``counts`` may be float after coarse-graining."""

    axis: HistogramAxis
    counts: np.ndarray
    duration: int

    @property
    def duration_s(self) -> float:
        return self.duration / PS_PER_S

    @property
    def rate_per_bin(self) -> np.ndarray:
        return self.counts / self.duration_s

    def at(self, k: int, ell: int):
        n = self.axis.n_side
        return self.counts[k + n, ell + n]


def _check_sorted(stream: DetectionStream) -> None:
    if not stream.is_sorted():
        raise UnsortedInput(f"channel {stream.channel} timestamps are not sorted")


def _common_duration(streams) -> int:
    durations = {s.duration for s in streams}
    if len(durations) != 1:
        raise DurationMismatch(f"streams have different durations: {sorted(durations)}")
    return durations.pop()


def singles_rates(streams) -> SinglesRates:
    streams = list(streams)
    duration = _common_duration(streams)
    seconds = duration / PS_PER_S
    return SinglesRates(tuple(len(s) / seconds for s in streams), duration)


def pair_histogram(stream_i: DetectionStream, stream_j: DetectionStream, axis: HistogramAxis) -> PairHistogram:
    """Histogram of tau = t_i - t_j over all partners, O(n + m + matches)."""
    _check_sorted(stream_i)
    _check_sorted(stream_j)
    duration = _common_duration([stream_i, stream_j])
    counts = np.zeros(axis.n_bins, dtype=np.int64)
    pair_histogram_kernel(
        stream_i.timestamps, stream_j.timestamps,
        np.int64(axis.tau_max), np.int64(axis.bin_width), np.int64(axis.n_side), counts,
    )
    return PairHistogram((stream_i.channel, stream_j.channel), axis, counts, duration)


def pair_histogram_linear(stream_i: DetectionStream, stream_j: DetectionStream, axis: HistogramAxis) -> PairHistogram:
    """Pair histogram with linear (cloud-in-cell) weights between bin centers.

    In the three-fold map the 2-3 delay only appears as the difference l - k
    of two rounded delays. For a uniformly random third event that difference
    is distributed like this interpolated histogram, not like the rounded
    one, so this is the estimator the diagonal ridge needs. Weights are
    accumulated as exact integers (units of 1/dt) and rescaled at the end.
    """
    _check_sorted(stream_i)
    _check_sorted(stream_j)
    duration = _common_duration([stream_i, stream_j])
    acc = np.zeros(axis.n_bins, dtype=np.int64)
    pair_histogram_linear_kernel(
        stream_i.timestamps, stream_j.timestamps,
        np.int64(axis.tau_max), np.int64(axis.bin_width), np.int64(axis.n_side), acc,
    )
    counts = acc / axis.bin_width
    return PairHistogram((stream_i.channel, stream_j.channel), axis, counts, duration, "linear")


def _chunk_bounds(n: int, n_chunks: int):
    edges = np.linspace(0, n, max(1, n_chunks) + 1).astype(np.int64)
    return list(zip(edges[:-1], edges[1:]))


def triple_histogram(
    s1: DetectionStream,
    s2: DetectionStream,
    s3: DetectionStream,
    axis: HistogramAxis,
    n_chunks: int = 1,
    workers: int = 1,
) -> TripleHistogram:
    """All triples with |tau_12| < tau_max and |tau_13| < tau_max.

    Channel 1 can be split into ``n_chunks`` contiguous blocks whose partial
    maps are summed; with ``workers > 1`` blocks run on threads (the kernel
    releases the GIL). The result does not depend on the chunking.
    """
    for s in (s1, s2, s3):
        _check_sorted(s)
    duration = _common_duration([s1, s2, s3])
    args = (np.int64(axis.tau_max), np.int64(axis.bin_width), np.int64(axis.n_side))
    t1 = s1.timestamps

    def run(bounds):
        part = np.zeros((axis.n_bins, axis.n_bins), dtype=np.int64)
        a, b = bounds
        triple_histogram_kernel(t1[a:b], s2.timestamps, s3.timestamps, *args, part)
        return part

    chunks = _chunk_bounds(len(t1), n_chunks)
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    counts = parts[0]
    for p in parts[1:]:
        counts += p
    return TripleHistogram(axis, counts, duration)


# Brute-force references. Independent of the sweep kernels: they test every
# candidate partner, so they are only meant for small inputs.


def pair_histogram_naive(ti, tj, axis: HistogramAxis) -> np.ndarray:
    ti = np.asarray(ti, dtype=np.int64)
    tj = np.asarray(tj, dtype=np.int64)
    tau = (ti[:, None] - tj[None, :]).ravel()
    tau = tau[np.abs(tau) < axis.tau_max]
    k = axis.bin_of(tau)
    k = k[np.abs(k) <= axis.n_side]
    return np.bincount(k + axis.n_side, minlength=axis.n_bins).astype(np.int64)


def pair_histogram_linear_naive(ti, tj, axis: HistogramAxis) -> np.ndarray:
    ti = np.asarray(ti, dtype=np.int64)
    tj = np.asarray(tj, dtype=np.int64)
    tau = (ti[:, None] - tj[None, :]).ravel()
    tau = tau[np.abs(tau) < axis.tau_max]
    x = tau / axis.bin_width
    out = np.zeros(axis.n_bins)
    for j in range(-axis.n_side, axis.n_side + 1):
        out[j + axis.n_side] = np.clip(1.0 - np.abs(x - j), 0.0, None).sum()
    return out


def triple_histogram_naive(t1, t2, t3, axis: HistogramAxis) -> np.ndarray:
    t1, t2, t3 = (np.asarray(t, dtype=np.int64) for t in (t1, t2, t3))
    n = axis.n_side
    out = np.zeros((axis.n_bins, axis.n_bins), dtype=np.int64)
    d12 = t1[:, None] - t2[None, :]
    d13 = t1[:, None] - t3[None, :]
    ok12 = np.abs(d12) < axis.tau_max
    ok13 = np.abs(d13) < axis.tau_max
    for a in range(len(t1)):
        k = axis.bin_of(d12[a][ok12[a]])
        ell = axis.bin_of(d13[a][ok13[a]])
        k = k[np.abs(k) <= n]
        ell = ell[np.abs(ell) <= n]
        if k.size and ell.size:
            kk, ll = np.meshgrid(k, ell, indexing="ij")
            np.add.at(out, (kk.ravel() + n, ll.ravel() + n), 1)
    return out


def triple_histogram_loops(t1, t2, t3, axis: HistogramAxis) -> np.ndarray:
    """Plain triple loop; for micro-instances only."""
    n = axis.n_side
    dt = axis.bin_width
    out = np.zeros((axis.n_bins, axis.n_bins), dtype=np.int64)
    for a in t1:
        for b in t2:
            for c in t3:
                tau12, tau13 = int(a) - int(b), int(a) - int(c)
                if abs(tau12) < axis.tau_max and abs(tau13) < axis.tau_max:
                    k = (2 * tau12 + dt) // (2 * dt)
                    ell = (2 * tau13 + dt) // (2 * dt)
                    if abs(k) <= n and abs(ell) <= n:
                        out[k + n, ell + n] += 1
    return out


def check_same_axis(*axes: HistogramAxis) -> HistogramAxis:
    first = axes[0]
    for other in axes[1:]:
        if other != first:
            raise AxisMismatch(f"axis {other} differs from {first}")
    return first


def crop_matrix(matrix: np.ndarray, axis: HistogramAxis, new_axis: HistogramAxis) -> np.ndarray:
    if new_axis.bin_width != axis.bin_width:
        raise AxisMismatch("cannot crop to a different bin width")
    off = axis.n_side - new_axis.n_side
    if off < 0:
        raise WindowTooLarge("cropped window larger than source")
    side = new_axis.n_bins
    return np.array(matrix[off:off + side, off:off + side])
