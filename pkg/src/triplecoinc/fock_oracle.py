"""Single-mode Fock-space calculations for weakly seeded down-conversion.

States are kept unnormalized, as in a perturbative expansion; call
``TruncatedFockState.normalized`` explicitly when a physical state is needed.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ExpansionInvalid, NegativeInput, NonPositiveInput

DEFAULT_N_MAX = 8
DEFAULT_MARGIN = 10.0


@dataclass(frozen=True)
class TruncatedFockState:
    """Complex amplitudes c_n over Fock levels 0..n_max."""

    amplitudes: tuple[complex, ...]

    def __post_init__(self):
        amps = tuple(complex(a) for a in self.amplitudes)
        if not amps:
            raise ValueError("a Fock state needs at least the vacuum amplitude")
        if not all(math.isfinite(a.real) and math.isfinite(a.imag) for a in amps):
            raise ValueError("amplitudes must be finite")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def fock(cls, n: int, n_max: int = DEFAULT_N_MAX) -> "TruncatedFockState":
        if not 0 <= n <= n_max:
            raise ValueError(f"level {n} outside 0..{n_max}")
        amps = [0j] * (n_max + 1)
        amps[n] = 1.0
        return cls(tuple(amps))

    @property
    def n_max(self) -> int:
        return len(self.amplitudes) - 1

    def as_array(self) -> np.ndarray:
        return np.asarray(self.amplitudes, dtype=complex)

    @property
    def norm_squared(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.amplitudes))

    def normalized(self) -> "TruncatedFockState":
        norm2 = self.norm_squared
        if norm2 == 0.0:
            raise ValueError("cannot normalize the zero vector")
        scale = 1.0 / math.sqrt(norm2)
        return TruncatedFockState(tuple(a * scale for a in self.amplitudes))

    def annihilate(self) -> "TruncatedFockState":
        """Apply a: c_n -> sqrt(n+1) c_{n+1}. The top level maps to zero."""
        amps = self.amplitudes
        out = [math.sqrt(n + 1) * amps[n + 1] for n in range(self.n_max)] + [0j]
        return TruncatedFockState(tuple(out))

    def create(self) -> "TruncatedFockState":
        """Apply a† within the truncated space; the |n_max> component is lost."""
        amps = self.amplitudes
        out = [0j] + [math.sqrt(n) * amps[n - 1] for n in range(1, self.n_max + 1)]
        return TruncatedFockState(tuple(out))


@dataclass(frozen=True)
class PdcParams:
    """Gain γ (= ηt, pump amplitude absorbed) and coherent seed amplitude β."""

    gamma: complex
    beta: complex = 0.0
    max_amplitude: float = field(default=0.1, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "gamma", complex(self.gamma))
        object.__setattr__(self, "beta", complex(self.beta))
        _check_expansion(self)


def _check_expansion(params: PdcParams) -> None:
    limit = params.max_amplitude
    if abs(params.gamma) > limit:
        raise ExpansionInvalid(f"|gamma|={abs(params.gamma):g} exceeds low-gain threshold {limit:g}")
    if abs(params.beta) > limit:
        raise ExpansionInvalid(f"|beta|={abs(params.beta):g} exceeds weak-seed threshold {limit:g}")


def evolve_weak_seed(
    params: PdcParams, keep_low_orders: bool = True, n_max: int = DEFAULT_N_MAX
) -> TruncatedFockState:
    """First-order evolution of |0> + β|1> under the pair-creation Hamiltonian.

    Returns |0> + β|1> + γ√2|2> + γβ√6|3>. With ``keep_low_orders=False`` the
    vacuum and one-photon terms, which never produce coincidences, are dropped.
    """
    _check_expansion(params)
    if n_max < 3:
        raise ValueError("n_max must be at least 3 to hold the three-photon term")
    g, b = params.gamma, params.beta
    amps = [0j] * (n_max + 1)
    if keep_low_orders:
        amps[0] = 1.0
        amps[1] = b
    amps[2] = g * math.sqrt(2.0)
    amps[3] = g * b * math.sqrt(6.0)
    return TruncatedFockState(tuple(amps))


def normally_ordered_correlator(state: TruncatedFockState, k: int) -> float:
    """<psi| (a†)^k a^k |psi> = || a^k psi ||^2, no normalization applied."""
    if k < 1:
        raise ValueError("order k must be >= 1")
    if k > state.n_max:
        raise ValueError(f"order {k} exceeds truncation n_max={state.n_max}")
    reduced = state
    for _ in range(k):
        reduced = reduced.annihilate()
    return reduced.norm_squared


def g2_seed(params: PdcParams) -> float:
    _check_expansion(params)
    return 4.0 * abs(params.gamma) ** 2


def g3_seed(params: PdcParams) -> float:
    _check_expansion(params)
    return 36.0 * abs(params.gamma) ** 2 * abs(params.beta) ** 2


def predicted_g3n_peak() -> float:
    """Leading-order g3n(0,0): 1 + G3_seed / (S_s ΔT G2_seed) = 1 + 36/4."""
    return 1.0 + 36.0 / 4.0


class DominantProcess(str, enum.Enum):
    MULTI_PAIR = "multi_pair"
    SEED_STIMULATED = "seed_stimulated"
    SEED_POISSONIAN = "seed_poissonian"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class RegimeReport:
    gamma_sq: float
    beta_sq: float
    narrow_window_ok: bool
    extended_window_ok: bool
    dominant_process: DominantProcess
    margin: float = DEFAULT_MARGIN

    def as_dict(self) -> dict:
        return {
            "gamma_sq": self.gamma_sq,
            "beta_sq": self.beta_sq,
            "narrow_window_ok": self.narrow_window_ok,
            "extended_window_ok": self.extended_window_ok,
            "dominant_process": self.dominant_process.value,
            "margin": self.margin,
        }


def classify_regime(gamma_sq: float, beta_sq: float, margin: float = DEFAULT_MARGIN) -> RegimeReport:
    """Check γ² ≪ β² ≪ γ (narrow) and γ² ≪ β² ≪ 1 (extended).

    "≪" means smaller by at least ``margin``. The dominant three-fold source is
    the largest of γ⁴ (double pairs), γ²β² (stimulated) and β⁶ (seed alone),
    reported only when it beats the runner-up by ``margin``.
    """
    if gamma_sq < 0 or beta_sq < 0:
        raise NegativeInput("gamma_sq and beta_sq must be non-negative")
    if margin < 1:
        raise ValueError("margin must be >= 1")
    lower_ok = gamma_sq * margin < beta_sq
    extended = lower_ok and beta_sq * margin < 1.0
    # for gamma_sq > 1 the narrow upper bound would exceed the extended one
    narrow = extended and beta_sq * margin < math.sqrt(gamma_sq)

    scales = {
        DominantProcess.MULTI_PAIR: gamma_sq**2,
        DominantProcess.SEED_STIMULATED: gamma_sq * beta_sq,
        DominantProcess.SEED_POISSONIAN: beta_sq**3,
    }
    ranked = sorted(scales.items(), key=lambda kv: kv[1], reverse=True)
    (top, top_val), (_, second_val) = ranked[0], ranked[1]
    if top_val > 0 and top_val >= margin * second_val:
        dominant = top
    else:
        dominant = DominantProcess.INDETERMINATE
    return RegimeReport(gamma_sq, beta_sq, narrow, extended, dominant, margin)


def estimate_gamma_sq(pair_rate: float, bin_width: float) -> float:
    """γ² ≈ R_S ΔT / 4 from the detected pair rate (1/s) and bin width (s)."""
    if pair_rate <= 0 or bin_width <= 0:
        raise NonPositiveInput("pair_rate and bin_width must be > 0")
    return pair_rate * bin_width / 4.0


def estimate_beta_sq(g3_seed_value: float, g2_seed_value: float) -> float:
    """β² ≈ G3_seed / (9 G2_seed)."""
    if g2_seed_value <= 0:
        raise NonPositiveInput("g2_seed_value must be > 0")
    if g3_seed_value < 0:
        raise NegativeInput("g3_seed_value must be >= 0")
    return g3_seed_value / (9.0 * g2_seed_value)
