"""Monte-Carlo detection streams for a CW pair source seen by three detectors.

Pairs arrive as a stationary Poisson process, each photon gets an independent
Gaussian timing offset and is routed to channel 1, 2, 3 or lost. Uncorrelated
background is Poisson-uniform per channel. Optionally, genuine triplets
(three photons from one event) are injected to emulate the stimulated process.

Time base is integer picoseconds throughout.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._kernels import dead_time_mask
from .errors import ConfigInvalid, EventOverflow

PS_PER_S = 10**12
RNG_ALGORITHM = "numpy.Philox4x64-10/SeedSequence.spawn"
DEFAULT_EVENT_CAP = 10**9


def seconds_to_ps(value: float) -> int:
    return int(round(value * PS_PER_S))


@dataclass(frozen=True)
class SimConfig:
    """Source, routing, background and detector parameters (SI units)."""

    pair_rate: float = 0.0
    sim_time: float = 1.0
    corr_sigma: float = 100e-12
    eta: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3)
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)
    triplet_rate: float = 0.0
    dead_time: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rng_seed: int = 0
    event_cap: float = DEFAULT_EVENT_CAP

    def __post_init__(self):
        for name in ("eta", "background", "dead_time"):
            value = getattr(self, name)
            if np.ndim(value) == 0:
                value = (value,) * 3
            value = tuple(float(v) for v in value)
            if len(value) != 3:
                raise ConfigInvalid(f"{name} needs three per-channel values")
            object.__setattr__(self, name, value)
        self.validate()

    def validate(self) -> None:
        if not self.sim_time > 0:
            raise ConfigInvalid("sim_time must be > 0")
        scalars = {
            "pair_rate": self.pair_rate,
            "corr_sigma": self.corr_sigma,
            "triplet_rate": self.triplet_rate,
        }
        for name, value in scalars.items():
            if not (value >= 0 and math.isfinite(value)):
                raise ConfigInvalid(f"{name} must be finite and >= 0, got {value}")
        for name in ("background", "dead_time"):
            if any(not (v >= 0 and math.isfinite(v)) for v in getattr(self, name)):
                raise ConfigInvalid(f"{name} entries must be finite and >= 0")
        if any(not 0 <= e <= 1 for e in self.eta):
            raise ConfigInvalid("each eta_i must lie in [0, 1]")
        if sum(self.eta) > 1 + 1e-12:
            raise ConfigInvalid(f"eta_1 + eta_2 + eta_3 = {sum(self.eta):g} exceeds 1")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ConfigInvalid("rng_seed must fit in an unsigned 64-bit integer")

    @property
    def duration_ps(self) -> int:
        return seconds_to_ps(self.sim_time)

    def expected_events(self) -> float:
        """Photons generated before routing and loss, plus all background."""
        t = self.sim_time
        return 2 * self.pair_rate * t + 3 * self.triplet_rate * t + sum(self.background) * t

    def to_dict(self) -> dict:
        d = asdict(self)
        d["eta"] = list(self.eta)
        d["background"] = list(self.background)
        d["dead_time"] = list(self.dead_time)
        return d


@dataclass(frozen=True, eq=False)
class DetectionStream:
    """Sorted arrival times (int64 ps) of one channel, all in [0, duration)."""

    channel: int
    timestamps: np.ndarray
    duration: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ts = np.ascontiguousarray(self.timestamps, dtype=np.int64)
        ts.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "duration", int(self.duration))

    def __len__(self):
        return len(self.timestamps)

    @property
    def duration_s(self) -> float:
        return self.duration / PS_PER_S

    def is_sorted(self, strict: bool = False) -> bool:
        d = np.diff(self.timestamps)
        return bool(np.all(d > 0) if strict else np.all(d >= 0))

    def __eq__(self, other):
        if not isinstance(other, DetectionStream):
            return NotImplemented
        return (
            self.channel == other.channel
            and self.duration == other.duration
            and np.array_equal(self.timestamps, other.timestamps)
        )


def apply_dead_time(stream: DetectionStream, dead: float) -> DetectionStream:
    """Greedy forward pass: keep an event iff it is >= dead after the last kept one.

    ``dead`` is in seconds.
    """
    dead_ps = seconds_to_ps(dead)
    if dead_ps <= 0 or len(stream) == 0:
        return stream
    keep = dead_time_mask(stream.timestamps, np.int64(dead_ps))
    meta = dict(stream.meta)
    meta["dead_time_dropped"] = meta.get("dead_time_dropped", 0) + int((~keep).sum())
    return DetectionStream(stream.channel, stream.timestamps[keep], stream.duration, meta)


def _route(rng: np.random.Generator, n: int, eta) -> np.ndarray:
    """0, 1, 2 for channels 1-3 and 3 for lost (cumulative-probability rule)."""
    cum = np.cumsum(eta)
    return np.searchsorted(cum, rng.random(n), side="right")


def simulate(config: SimConfig) -> tuple[DetectionStream, DetectionStream, DetectionStream]:
    """Generate three channel streams. Deterministic for a fixed ``rng_seed``."""
    config.validate()
    if config.expected_events() > config.event_cap:
        raise EventOverflow(
            f"expected {config.expected_events():.3g} events exceeds cap {config.event_cap:.3g}"
        )
    duration = config.duration_ps
    sigma_ps = config.corr_sigma * PS_PER_S
    seq = np.random.SeedSequence(int(config.rng_seed))
    pair_ss, trip_ss, *bg_ss = seq.spawn(5)
    per_channel: list[list[np.ndarray]] = [[], [], []]

    def emit(rng, n_events, photons):
        # one creation time per event, then `photons` jittered and routed copies
        if n_events == 0:
            return
        t0 = rng.integers(0, duration, size=n_events, dtype=np.int64)
        for _ in range(photons):
            jitter = np.rint(rng.normal(0.0, sigma_ps, size=n_events)).astype(np.int64)
            times = t0 + jitter
            where = _route(rng, n_events, config.eta)
            for ch in range(3):
                per_channel[ch].append(times[where == ch])

    pair_rng = np.random.Generator(np.random.Philox(pair_ss))
    emit(pair_rng, pair_rng.poisson(config.pair_rate * config.sim_time), 2)
    trip_rng = np.random.Generator(np.random.Philox(trip_ss))
    emit(trip_rng, trip_rng.poisson(config.triplet_rate * config.sim_time), 3)

    streams = []
    for ch in range(3):
        bg_rng = np.random.Generator(np.random.Philox(bg_ss[ch]))
        n_bg = bg_rng.poisson(config.background[ch] * config.sim_time)
        per_channel[ch].append(bg_rng.integers(0, duration, size=n_bg, dtype=np.int64))
        times = np.concatenate(per_channel[ch]) if per_channel[ch] else np.empty(0, np.int64)
        inside = times[(times >= 0) & (times < duration)]
        unique = np.unique(inside)
        meta = {
            "rng_algorithm": RNG_ALGORITHM,
            "rng_seed": int(config.rng_seed),
            "clipped": int(times.size - inside.size),
            "collapsed": int(inside.size - unique.size),
            "dead_time_dropped": 0,
        }
        stream = DetectionStream(ch + 1, unique, duration, meta)
        streams.append(apply_dead_time(stream, config.dead_time[ch]))
    return tuple(streams)


# Analytic expectations of the generative model, used to calibrate triplet
# injection and as an independent check of simulated rates.


def _normal_bin_fraction(sigma: float, lo: float, hi: float) -> float:
    from scipy.stats import norm

    if sigma == 0:
        return float(lo <= 0 < hi)
    return float(norm.cdf(hi / sigma) - norm.cdf(lo / sigma))


def central_pair_fraction(corr_sigma: float, bin_width: float) -> float:
    """P(tau in the zero bin) for tau = difference of two N(0, sigma²) offsets."""
    return _normal_bin_fraction(math.sqrt(2) * corr_sigma, -bin_width / 2, bin_width / 2)


def central_diagonal_fraction(corr_sigma: float, bin_width: float) -> float:
    """Weight of the (0, 0) bin in the diagonal ridge of the three-fold map.

    There the 2-3 delay enters as the difference of two rounded delays; for a
    random third event this has triangular weight max(0, 1 - |tau| / dt).
    """
    from scipy.integrate import quad
    from scipy.stats import norm

    s = math.sqrt(2) * corr_sigma
    if s == 0:
        return 1.0
    val, _ = quad(lambda x: (1 - abs(x) / bin_width) * norm.pdf(x, scale=s), -bin_width, bin_width, points=[0.0])
    return val


def central_triple_fraction(corr_sigma: float, bin_width: float) -> float:
    """P(tau12 and tau13 both in the zero bin) for three i.i.d. N(0, sigma²) offsets."""
    from scipy.stats import multivariate_normal

    h = bin_width / 2
    if corr_sigma == 0:
        return 1.0
    s2 = corr_sigma**2
    mvn = multivariate_normal(mean=[0.0, 0.0], cov=[[2 * s2, s2], [s2, 2 * s2]])
    return float(mvn.cdf([h, h]) - mvn.cdf([-h, h]) - mvn.cdf([h, -h]) + mvn.cdf([-h, -h]))


@dataclass(frozen=True)
class ExpectedCentralRates:
    singles: tuple[float, float, float]
    pair_central: dict
    accidental_center: float
    triplet_center: float

    @property
    def g3n_center(self) -> float:
        return 1.0 + self.triplet_center / self.accidental_center


def expected_central_rates(config: SimConfig, bin_width: float) -> ExpectedCentralRates:
    """Expected rates (1/s) in the zero-delay bins, ignoring dead time and edges.

    Every detected photon pair out of an n-photon event feeds the pair peak,
    so the correlated (i, j) rate is (2 R_p + 6 R_t) eta_i eta_j.
    """
    eta = config.eta
    rp, rt = config.pair_rate, config.triplet_rate
    singles = tuple((2 * rp + 3 * rt) * eta[i] + config.background[i] for i in range(3))
    f2 = central_pair_fraction(config.corr_sigma, bin_width)
    pc = {
        (i, j): (2 * rp + 6 * rt) * eta[i - 1] * eta[j - 1] * f2
        for i, j in ((1, 2), (1, 3), (2, 3))
    }
    diag = pc[(2, 3)] / f2 * central_diagonal_fraction(config.corr_sigma, bin_width) if f2 else 0.0
    r1, r2, r3 = singles
    dt = bin_width
    accidental = r3 * pc[(1, 2)] * dt + r2 * pc[(1, 3)] * dt + r1 * diag * dt + r1 * r2 * r3 * dt**2
    triplet = rt * 6 * eta[0] * eta[1] * eta[2] * central_triple_fraction(config.corr_sigma, dt)
    return ExpectedCentralRates(singles, pc, accidental, triplet)


def calibrate_triplet_rate(config: SimConfig, bin_width: float, excess_ratio: float = 9.0) -> float:
    """Triplet rate making the expected central excess ``excess_ratio`` x accidentals."""
    from dataclasses import replace

    from scipy.optimize import brentq

    if min(config.eta) <= 0:
        raise ConfigInvalid("triplet calibration needs all eta_i > 0")

    def mismatch(rt):
        exp = expected_central_rates(replace(config, triplet_rate=rt), bin_width)
        return exp.triplet_center - excess_ratio * exp.accidental_center

    # accidentals grow ~rt² through singles and pair peaks, so the achievable
    # excess has a maximum; take the smallest rate that reaches the target
    lo = 0.0
    for hi in np.logspace(-6, 9, 301):
        if mismatch(hi) >= 0:
            return brentq(mismatch, lo, hi, xtol=1e-14, rtol=1e-13)
        lo = hi
    raise ConfigInvalid(f"no triplet rate reaches an excess of {excess_ratio:g}x accidentals")
