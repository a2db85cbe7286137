"""Coarse-graining of the central block of a three-fold map.

Background regions away from the coincidence lines are replaced by their
mean; the lines tau_12 = 0, tau_13 = 0, tau_23 = 0 (and the off-line bins of
a strip around them) are averaged along their own direction over time
pixels, separately for negative and positive delay. The (0, 0) bin is never
touched.

Matrix orientation follows coincidence.TripleHistogram: rows k ~ tau_12,
columns l ~ tau_13, tau_23 ~ l - k.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coincidence import HistogramAxis, TripleHistogram, crop_matrix
from .errors import AxisMismatch, PartitionGap, SpecInvalid, WindowAsymmetric, WindowTooLarge

LABELS = (
    "center",
    "ridge_12",
    "ridge_13",
    "ridge_23",
    "quadrant_A",
    "quadrant_B",
    "tri_1",
    "tri_2",
    "tri_3",
    "tri_4",
)
CENTER, RIDGE_12, RIDGE_13, RIDGE_23 = 0, 1, 2, 3
RIDGES = (RIDGE_12, RIDGE_13, RIDGE_23)
BACKGROUND = tuple(range(4, 10))

GEOMETRY_NOTE = (
    "bins within strip_halfwidth of a line go to the nearest line (ties: 12, 13, 23); "
    "quadrant_A: k>0,l<0; quadrant_B: k<0,l>0; tri_1: 0<k<l; tri_2: 0<l<k; "
    "tri_3: k<l<0; tri_4: l<k<0 (k ~ tau_12, l ~ tau_13)"
)


def _check_square(counts: np.ndarray, axis: HistogramAxis) -> None:
    shape = np.shape(counts)
    if len(shape) != 2 or shape[0] != shape[1] or shape[0] % 2 != 1:
        raise WindowAsymmetric(f"three-fold map must be square with odd side, got {shape}")
    if shape[0] != axis.n_bins:
        raise WindowAsymmetric(f"map side {shape[0]} does not match axis ({axis.n_bins} bins)")


def central_window(hist: TripleHistogram, tau_max: int) -> TripleHistogram:
    """Crop to |tau_12|, |tau_13| < tau_max (ps); bin (0, 0) stays centered."""
    _check_square(hist.counts, hist.axis)
    tau_max = int(tau_max)
    if tau_max > hist.axis.tau_max:
        raise WindowTooLarge(f"window {tau_max} ps exceeds histogram range {hist.axis.tau_max} ps")
    new_axis = HistogramAxis(hist.axis.bin_width, tau_max)
    return TripleHistogram(new_axis, crop_matrix(hist.counts, hist.axis, new_axis), hist.duration)


@dataclass(frozen=True, eq=False)
class RegionPartition:
    """Label (index into LABELS) and signed line offset for every window bin."""

    n_side: int
    strip_halfwidth: int
    labels: np.ndarray
    offsets: np.ndarray
    geometry: str = field(default=GEOMETRY_NOTE, compare=False)

    @classmethod
    def build(cls, n_side: int, strip_halfwidth: int = 2) -> "RegionPartition":
        if strip_halfwidth < 0:
            raise ValueError("strip_halfwidth must be >= 0")
        idx = np.arange(-n_side, n_side + 1)
        k = idx[:, None]
        ell = idx[None, :]
        shape = (idx.size, idx.size)
        offs = np.stack(np.broadcast_arrays(k, ell, ell - k))  # ridge_12, ridge_13, ridge_23
        dist = np.abs(offs)
        nearest = np.argmin(dist, axis=0)  # first minimum wins ties
        near_dist = np.take_along_axis(dist, nearest[None], axis=0)[0]
        labels = np.full(shape, -1, dtype=np.int8)
        in_strip = near_dist <= strip_halfwidth
        labels[in_strip] = (nearest + 1)[in_strip]
        kk, ll = np.broadcast_arrays(k, ell)
        bg = ~in_strip
        labels[bg & (kk > 0) & (ll < 0)] = 4
        labels[bg & (kk < 0) & (ll > 0)] = 5
        labels[bg & (kk > 0) & (ll > kk)] = 6
        labels[bg & (ll > 0) & (ll < kk)] = 7
        labels[bg & (ll < 0) & (ll > kk)] = 8
        labels[bg & (kk < 0) & (ll < kk)] = 9
        labels[n_side, n_side] = CENTER
        offsets = np.take_along_axis(offs, nearest[None], axis=0)[0].astype(np.int64)
        offsets[~in_strip] = 0
        return cls(n_side, strip_halfwidth, labels, offsets)

    @property
    def side(self) -> int:
        return 2 * self.n_side + 1

    def sizes(self) -> dict[str, int]:
        counts = np.bincount(self.labels[self.labels >= 0].ravel(), minlength=len(LABELS))
        return {name: int(c) for name, c in zip(LABELS, counts)}

    def check_covers(self, shape) -> None:
        if tuple(shape) != (self.side, self.side):
            raise PartitionGap(f"partition is {self.side}x{self.side}, map is {shape}")
        if np.any(self.labels < 0):
            raise PartitionGap("partition leaves bins unlabelled")

    def describe(self) -> dict:
        return {
            "n_side": self.n_side,
            "strip_halfwidth": self.strip_halfwidth,
            "labels": list(LABELS),
            "sizes": self.sizes(),
            "geometry": self.geometry,
        }

    def line_coordinates(self, ridge: int) -> np.ndarray:
        """Position of each bin along a ridge's direction (l for ridge_12, k otherwise)."""
        idx = np.arange(-self.n_side, self.n_side + 1)
        k, ell = np.broadcast_arrays(idx[:, None], idx[None, :])
        return ell if ridge == RIDGE_12 else k


def region_sums(hist: TripleHistogram, partition: RegionPartition) -> dict[str, tuple]:
    """(sum, size) per background region, exact for integer counts."""
    partition.check_covers(np.shape(hist.counts))
    counts = np.asarray(hist.counts)
    return {
        LABELS[lab]: (counts[partition.labels == lab].sum(), int((partition.labels == lab).sum()))
        for lab in BACKGROUND
    }


def region_average(hist: TripleHistogram, partition: RegionPartition) -> TripleHistogram:
    """Replace every background-region bin by its region mean; lines and center untouched."""
    _check_square(hist.counts, hist.axis)
    partition.check_covers(np.shape(hist.counts))
    out = np.array(hist.counts, dtype=float)
    for name, (total, size) in region_sums(hist, partition).items():
        if size:
            out[partition.labels == LABELS.index(name)] = total / size
    return TripleHistogram(hist.axis, out, hist.duration)


def cross_sections(hist: TripleHistogram) -> dict[str, np.ndarray]:
    """C12|3(t) = G(0, t), C13|2(t) = G(t, 0), C23|1(t) = G(t, t) over the window."""
    _check_square(hist.counts, hist.axis)
    counts = np.asarray(hist.counts)
    n = hist.axis.n_side
    return {
        "12|3": np.array(counts[n, :]),
        "13|2": np.array(counts[:, n]),
        "23|1": np.array(np.diagonal(counts)),
    }


@dataclass(frozen=True)
class PixelSpec:
    t_pix: int  # ps
    bin_width: int  # ps

    def __post_init__(self):
        if self.t_pix < self.bin_width or self.t_pix % self.bin_width:
            raise SpecInvalid(
                f"pixel width {self.t_pix} ps must be a multiple of the bin width {self.bin_width} ps, "
                "and not smaller"
            )

    @property
    def bins_per_pixel(self) -> int:
        return self.t_pix // self.bin_width


@dataclass(frozen=True, eq=False)
class PixelProfile:
    coords: np.ndarray  # input bin positions
    pixel_of: np.ndarray  # pixel index per input bin
    values: np.ndarray  # mean per pixel
    mean_delay: np.ndarray  # ps, mean position of member bins
    sizes: np.ndarray  # N_m per pixel
    partial_edge: bool  # a trailing pixel is shorter than T_pix

    def expanded(self) -> np.ndarray:
        return self.values[self.pixel_of]


def pixel_slot(coords: np.ndarray, n_per_pixel: int) -> np.ndarray:
    """Signed pixel slot: 0 for tau = 0, +1, +2.. outward for tau > 0, -1, -2.. for tau < 0."""
    c = np.asarray(coords, dtype=np.int64)
    slot = np.zeros_like(c)
    pos = c > 0
    neg = c < 0
    slot[pos] = (c[pos] - 1) // n_per_pixel + 1
    slot[neg] = -((-c[neg] - 1) // n_per_pixel + 1)
    return slot


def pixel_average(coords, values, spec: PixelSpec) -> PixelProfile:
    """Average a line profile over non-overlapping pixels on each side of zero.

    ``coords`` are integer bin positions; the zero bin, if present, is passed
    through as its own pixel. Missing positions are simply not averaged in.
    """
    coords = np.asarray(coords, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    n_per = spec.bins_per_pixel
    slot = pixel_slot(coords, n_per)
    uniq, pixel_of = np.unique(slot, return_inverse=True)
    sizes = np.bincount(pixel_of, minlength=uniq.size)
    means = np.bincount(pixel_of, weights=values, minlength=uniq.size) / sizes
    delay = np.bincount(pixel_of, weights=coords * spec.bin_width, minlength=uniq.size) / sizes
    reach = int(np.abs(coords).max()) if coords.size else 0
    return PixelProfile(coords, pixel_of, means, delay, sizes, bool(reach % n_per))


@dataclass(frozen=True, eq=False)
class LineProfile:
    ridge: int
    offset: int
    rows: np.ndarray
    cols: np.ndarray
    pixels: PixelProfile


def ridge_profiles(hist: TripleHistogram, partition: RegionPartition, spec: PixelSpec) -> list[LineProfile]:
    """Pixelated profiles of every line inside the ridge strips.

    Offset 0 reproduces the cross sections (minus the center); offset d != 0 is
    the parallel line d bins away, pixelated the same way.
    """
    partition.check_covers(np.shape(hist.counts))
    if spec.bin_width != hist.axis.bin_width:
        raise AxisMismatch("PixelSpec bin width differs from the histogram bin width")
    counts = np.asarray(hist.counts, dtype=float)
    out = []
    for ridge in RIDGES:
        member = partition.labels == ridge
        along = partition.line_coordinates(ridge)
        for d in np.unique(partition.offsets[member]):
            rows, cols = np.nonzero(member & (partition.offsets == d))
            pix = pixel_average(along[rows, cols], counts[rows, cols], spec)
            out.append(LineProfile(ridge, int(d), rows, cols, pix))
    return out


@dataclass(frozen=True, eq=False)
class CoarseMap:
    histogram: TripleHistogram
    groups: np.ndarray  # averaging group of every bin
    partition: RegionPartition
    spec: PixelSpec
    partial_edge: bool

    def group_sizes(self) -> np.ndarray:
        return np.bincount(self.groups.ravel())


def assemble_coarse_map(
    region_map: TripleHistogram,
    profiles: list[LineProfile],
    partition: RegionPartition,
    raw_center=None,
    spec: PixelSpec | None = None,
) -> CoarseMap:
    """Regions from ``region_map``, line bins from their pixel, center kept raw."""
    _check_square(region_map.counts, region_map.axis)
    partition.check_covers(np.shape(region_map.counts))
    values = np.array(region_map.counts, dtype=float)
    n = partition.n_side
    groups = np.zeros(values.shape, dtype=np.int64)
    for lab in BACKGROUND:
        groups[partition.labels == lab] = lab
    next_id = len(LABELS)
    covered = np.zeros(values.shape, dtype=bool)
    for prof in profiles:
        values[prof.rows, prof.cols] = prof.pixels.expanded()
        groups[prof.rows, prof.cols] = next_id + prof.pixels.pixel_of
        covered[prof.rows, prof.cols] = True
        next_id += prof.pixels.values.size
    ridge_bins = np.isin(partition.labels, RIDGES)
    if np.any(ridge_bins & ~covered):
        raise PartitionGap("some ridge-strip bins have no pixel profile")
    if raw_center is not None:
        values[n, n] = raw_center
    groups[n, n] = CENTER
    partial = any(p.pixels.partial_edge for p in profiles)
    hist = TripleHistogram(region_map.axis, values, region_map.duration)
    return CoarseMap(hist, groups, partition, spec, partial)


def coarse_grain(hist: TripleHistogram, partition: RegionPartition, spec: PixelSpec) -> CoarseMap:
    region_map = region_average(hist, partition)
    profiles = ridge_profiles(hist, partition, spec)
    n = partition.n_side
    return assemble_coarse_map(region_map, profiles, partition, np.asarray(hist.counts)[n, n], spec)


def group_poisson_sigma(coarse: CoarseMap, expected_counts: np.ndarray) -> np.ndarray:
    """Poisson standard error of G3_coarse / G3a per bin.

    A bin averaged over group G has variance sum_G(lambda) / |G|^2; dividing by
    the bin's own expected count lambda_b gives the error of the ratio.
    """
    groups = coarse.groups.ravel()
    lam = np.asarray(expected_counts, dtype=float).ravel()
    total = np.bincount(groups, weights=lam)
    size = np.bincount(groups)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma = np.sqrt(total[groups]) / size[groups] / lam
    return sigma.reshape(coarse.groups.shape)
