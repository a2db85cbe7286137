"""Accidental three-fold model built from singles and pair histograms.

G3a(t12, t13) = R3 C12(t12) dT + R2 C13(t13) dT + R1 C23(t13 - t12) dT + R1 R2 R3 dT²

with C_ij the pair-histogram rate minus its flat level R_i R_j dT. The
normalized map is g3n = G3 / G3a.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import poisson

from .coincidence import (
    HistogramAxis,
    PairHistogram,
    SinglesRates,
    TripleHistogram,
    check_same_axis,
    crop_matrix,
)
from .errors import AxisMismatch, MaskedCenter, RateMismatch
from .tag_sim import PS_PER_S

OUTSIDE_MODES = ("zero", "clamp", "keep")


@dataclass(frozen=True, eq=False)
class CorrelatedPairProfile:
    channels: tuple[int, int]
    axis: HistogramAxis
    values: np.ndarray  # 1/s per bin
    flat_level: float

    def at_bins(self, k) -> np.ndarray:
        """Profile value at integer bin offsets; zero outside the measured range."""
        k = np.asarray(k)
        n = self.axis.n_side
        inside = np.abs(k) <= n
        out = np.zeros(k.shape, dtype=float)
        out[inside] = self.values[k[inside] + n]
        return out


def correlated_part(
    hist: PairHistogram,
    rates: SinglesRates,
    exclusion_radius: int = 5,
    outside: str = "zero",
) -> CorrelatedPairProfile:
    """Subtract the flat accidental level R_i R_j dT from a pair histogram.

    Bins farther than ``exclusion_radius`` bins from zero delay carry no
    physical correlation; ``outside`` sets how they are treated:
    "zero" forces them to 0, "clamp" only clips negatives, "keep" leaves them.
    """
    if outside not in OUTSIDE_MODES:
        raise ValueError(f"outside must be one of {OUTSIDE_MODES}")
    if rates.duration != hist.duration:
        raise RateMismatch("singles and pair histogram come from different acquisitions")
    i, j = hist.channels
    flat = rates.of(i) * rates.of(j) * hist.axis.bin_width_s
    values = hist.rate_per_bin - flat
    far = np.abs(hist.axis.bin_indices) > exclusion_radius
    if outside == "zero":
        values[far] = 0.0
    elif outside == "clamp":
        values[far] = np.maximum(values[far], 0.0)
    return CorrelatedPairProfile(hist.channels, hist.axis, values, flat)


@dataclass(frozen=True, eq=False)
class AccidentalModel:
    axis: HistogramAxis
    ridge_12: np.ndarray
    ridge_13: np.ndarray
    ridge_23: np.ndarray
    flat: float

    @property
    def values(self) -> np.ndarray:
        return self.ridge_12 + self.ridge_13 + self.ridge_23 + self.flat

    def at(self, k: int, ell: int) -> float:
        n = self.axis.n_side
        return float(self.values[k + n, ell + n])

    def components(self) -> dict:
        return {"ridge_12": self.ridge_12, "ridge_13": self.ridge_13, "ridge_23": self.ridge_23}

    def cropped(self, axis: HistogramAxis) -> "AccidentalModel":
        """Same model restricted to a smaller central window."""
        if axis == self.axis:
            return self
        crop = lambda m: crop_matrix(m, self.axis, axis)  # noqa: E731
        return AccidentalModel(axis, crop(self.ridge_12), crop(self.ridge_13), crop(self.ridge_23), self.flat)


def accidental_model(
    corr12: CorrelatedPairProfile,
    corr13: CorrelatedPairProfile,
    corr23: CorrelatedPairProfile,
    rates: SinglesRates,
    axis: HistogramAxis,
) -> AccidentalModel:
    check_same_axis(axis, corr12.axis, corr13.axis, corr23.axis)
    for prof, want in ((corr12, (1, 2)), (corr13, (1, 3)), (corr23, (2, 3))):
        if tuple(prof.channels) != want:
            raise AxisMismatch(f"expected profile for channels {want}, got {prof.channels}")
    dt = axis.bin_width_s
    r1, r2, r3 = rates.rates
    n = axis.n_bins
    k = axis.bin_indices[:, None]
    ell = axis.bin_indices[None, :]
    ridge_12 = np.broadcast_to(r3 * corr12.values[:, None] * dt, (n, n)).copy()
    ridge_13 = np.broadcast_to(r2 * corr13.values[None, :] * dt, (n, n)).copy()
    # tau_23 = tau_13 - tau_12, looked up by the integer bin difference
    ridge_23 = r1 * corr23.at_bins(ell - k) * dt
    return AccidentalModel(axis, ridge_12, ridge_13, ridge_23, r1 * r2 * r3 * dt * dt)


@dataclass(frozen=True, eq=False)
class NormalizedTriple:
    axis: HistogramAxis
    values: np.ndarray  # NaN where masked
    mask: np.ndarray  # True where the model fell below the floor
    measured_counts: np.ndarray
    model: np.ndarray  # 1/s per bin
    duration: int

    @property
    def duration_s(self) -> float:
        return self.duration / PS_PER_S

    def center(self) -> float:
        n = self.axis.n_side
        return float(self.values[n, n])

    def unmasked(self) -> np.ndarray:
        return self.values[~self.mask]


def normalized_g3(measured: TripleHistogram, model: AccidentalModel, floor: float | None = None) -> NormalizedTriple:
    """Elementwise G3 / G3a; bins whose model is below ``floor`` are masked.

    The default floor is 1e-3 of the flat accidental level.
    """
    check_same_axis(measured.axis, model.axis)
    if floor is None:
        floor = model.flat * 1e-3 or np.finfo(float).tiny
    if not floor > 0:
        raise ValueError("floor must be > 0")
    expected = model.values
    mask = expected < floor
    values = np.full(expected.shape, np.nan)
    values[~mask] = measured.rate_per_bin[~mask] / expected[~mask]
    return NormalizedTriple(model.axis, values, mask, np.asarray(measured.counts), expected, measured.duration)


def poisson_tail(observed: int, expected: float) -> float:
    """P(N >= observed) for N ~ Poisson(expected)."""
    if observed <= 0:
        return 1.0
    return float(poisson.sf(observed - 1, expected))


def peak_significance(normalized: NormalizedTriple) -> float:
    """Probability that accidentals alone give at least the observed central count."""
    n = normalized.axis.n_side
    if normalized.mask[n, n]:
        raise MaskedCenter("central bin is masked")
    observed = int(round(float(normalized.measured_counts[n, n])))
    expected = float(normalized.model[n, n]) * normalized.duration_s
    return poisson_tail(observed, expected)
