"""Triple-detector time-tag analysis: simulation, histograms, accidental model, coarse-graining."""
from .coincidence import HistogramAxis, pair_histogram, singles_rates, triple_histogram
from .fock_oracle import PdcParams, classify_regime, g2_seed, g3_seed, predicted_g3n_peak
from .pipeline import AnalysisConfig, analyze, analyze_histograms, build_histograms
from .tag_sim import DetectionStream, SimConfig, simulate

__version__ = "0.1.0"

__all__ = [
    "AnalysisConfig",
    "DetectionStream",
    "HistogramAxis",
    "PdcParams",
    "SimConfig",
    "analyze",
    "analyze_histograms",
    "build_histograms",
    "classify_regime",
    "g2_seed",
    "g3_seed",
    "pair_histogram",
    "predicted_g3n_peak",
    "simulate",
    "singles_rates",
    "triple_histogram",
]
