"""End-to-end analysis of three detection streams."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .background import (
    AccidentalModel,
    CorrelatedPairProfile,
    NormalizedTriple,
    accidental_model,
    correlated_part,
    normalized_g3,
)
from .coarse_grain import (
    CoarseMap,
    PixelSpec,
    RegionPartition,
    central_window,
    coarse_grain,
    group_poisson_sigma,
)
from .coincidence import (
    HistogramAxis,
    PairHistogram,
    SinglesRates,
    TripleHistogram,
    pair_histogram,
    pair_histogram_linear,
    singles_rates,
    triple_histogram,
)

PAIRS = ((1, 2), (1, 3), (2, 3))


@dataclass(frozen=True)
class AnalysisConfig:
    bin_width: int = 500  # ps
    n_side: int = 20  # histogram half-width in bins
    window_n_side: int | None = None  # central window for coarse-graining; None = full
    t_pix: int | None = None  # ps; None skips coarse-graining
    strip_halfwidth: int = 2
    exclusion_radius: int = 5
    outside: str = "zero"
    floor: float | None = None

    @property
    def axis(self) -> HistogramAxis:
        return HistogramAxis.centered(self.bin_width, self.n_side)


@dataclass(frozen=True, eq=False)
class Histograms:
    singles: SinglesRates
    pairs: dict
    triple: TripleHistogram
    diagonal_23: PairHistogram | None = None  # linear-binned 2-3 delays for the diagonal ridge


@dataclass(frozen=True, eq=False)
class AnalysisResult:
    histograms: Histograms
    profiles: dict
    model: AccidentalModel  # on the analysis window
    window: TripleHistogram  # raw counts on the analysis window
    coarse: CoarseMap | None
    normalized: NormalizedTriple
    sigma: np.ndarray  # Poisson error of each normalized bin under the null

    @property
    def expected_counts(self) -> np.ndarray:
        return self.model.values * self.window.duration_s


def build_histograms(streams, axis: HistogramAxis) -> Histograms:
    s = {st.channel: st for st in streams}
    pairs = {(i, j): pair_histogram(s[i], s[j], axis) for i, j in PAIRS}
    triple = triple_histogram(s[1], s[2], s[3], axis)
    diagonal = pair_histogram_linear(s[2], s[3], axis)
    return Histograms(singles_rates([s[1], s[2], s[3]]), pairs, triple, diagonal)


def model_from_histograms(
    singles: SinglesRates,
    pairs: dict[tuple, PairHistogram],
    axis: HistogramAxis,
    exclusion_radius: int = 5,
    outside: str = "zero",
    diagonal_23: PairHistogram | None = None,
) -> tuple[dict[tuple, CorrelatedPairProfile], AccidentalModel]:
    """Correlated profiles and the accidental model.

    ``diagonal_23`` (linear-binned) replaces the rounded 2-3 histogram for the
    diagonal ridge when given.
    """
    sources = dict(pairs)
    if diagonal_23 is not None:
        sources[(2, 3)] = diagonal_23
    profiles = {
        key: correlated_part(sources[key], singles, exclusion_radius, outside) for key in PAIRS
    }
    model = accidental_model(profiles[(1, 2)], profiles[(1, 3)], profiles[(2, 3)], singles, axis)
    return profiles, model


def analyze_histograms(hists: Histograms, cfg: AnalysisConfig) -> AnalysisResult:
    axis = hists.triple.axis
    profiles, model = model_from_histograms(
        hists.singles, hists.pairs, axis, cfg.exclusion_radius, cfg.outside, hists.diagonal_23
    )
    window = hists.triple
    if cfg.window_n_side is not None and cfg.window_n_side < axis.n_side:
        window = central_window(hists.triple, cfg.window_n_side * axis.bin_width + axis.bin_width // 2)
    model = model.cropped(window.axis)

    coarse = None
    measured = window
    if cfg.t_pix is not None:
        partition = RegionPartition.build(window.axis.n_side, cfg.strip_halfwidth)
        coarse = coarse_grain(window, partition, PixelSpec(cfg.t_pix, axis.bin_width))
        measured = coarse.histogram
    normalized = normalized_g3(measured, model, cfg.floor)
    expected = model.values * window.duration_s
    if coarse is not None:
        sigma = group_poisson_sigma(coarse, expected)
    else:
        with np.errstate(divide="ignore"):
            sigma = 1.0 / np.sqrt(expected)
    return AnalysisResult(hists, profiles, model, window, coarse, normalized, sigma)


def analyze(streams, cfg: AnalysisConfig) -> AnalysisResult:
    return analyze_histograms(build_histograms(streams, cfg.axis), cfg)
