import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from triplecoinc.background import (
    AccidentalModel,
    accidental_model,
    correlated_part,
    normalized_g3,
    peak_significance,
    poisson_tail,
)
from triplecoinc.coincidence import HistogramAxis, PairHistogram, SinglesRates, TripleHistogram
from triplecoinc.errors import AxisMismatch, MaskedCenter, RateMismatch
from triplecoinc.pipeline import AnalysisConfig, analyze
from triplecoinc.tag_sim import SimConfig, simulate

AXIS = HistogramAxis.centered(500, 10)
T_PS = 100 * 10**12
RATES = SinglesRates((1e4, 2e4, 3e4), T_PS)


def pair(i, j, rate_values, axis=AXIS, duration=T_PS):
    counts = np.asarray(rate_values, dtype=float) * duration / 1e12
    return PairHistogram((i, j), axis, counts, duration)


def flat_rate(i, j):
    return RATES.of(i) * RATES.of(j) * AXIS.bin_width_s


def profiles(peaks=(0.0, 0.0, 0.0)):
    out = []
    for (i, j), p in zip(((1, 2), (1, 3), (2, 3)), peaks):
        v = np.full(AXIS.n_bins, flat_rate(i, j))
        v[AXIS.n_side] += p
        out.append(correlated_part(pair(i, j, v), RATES))
    return out


def test_flat_level_arithmetic():
    r = SinglesRates((1e4, 1e4, 0), T_PS)
    prof = correlated_part(pair(1, 2, np.full(AXIS.n_bins, 0.05)), r)
    # R_i R_j dT = 1e4 * 1e4 * 5e-10 = 0.05 per second per bin
    assert prof.flat_level == pytest.approx(0.05)
    assert np.allclose(prof.values, 0, atol=1e-15)


def test_gaussian_peak_is_isolated():
    x = AXIS.bin_indices
    peak = 3.0 * np.exp(-0.5 * (x / 1.5) ** 2)
    prof = correlated_part(pair(1, 2, flat_rate(1, 2) + peak), RATES, exclusion_radius=10, outside="keep")
    assert np.allclose(prof.values, peak, atol=1e-9)


def test_outside_modes():
    v = np.full(AXIS.n_bins, flat_rate(1, 2))
    v[0] -= 0.5
    v[-1] += 0.5
    zero = correlated_part(pair(1, 2, v), RATES, exclusion_radius=5, outside="zero").values
    clamp = correlated_part(pair(1, 2, v), RATES, exclusion_radius=5, outside="clamp").values
    keep = correlated_part(pair(1, 2, v), RATES, exclusion_radius=5, outside="keep").values
    assert zero[0] == 0 and zero[-1] == 0
    assert clamp[0] == 0 and clamp[-1] == pytest.approx(0.5)
    assert keep[0] == pytest.approx(-0.5)
    with pytest.raises(ValueError):
        correlated_part(pair(1, 2, v), RATES, outside="sometimes")


def test_rate_mismatch():
    with pytest.raises(RateMismatch):
        correlated_part(pair(1, 2, np.zeros(AXIS.n_bins)), SinglesRates((1, 1, 1), T_PS + 1))


def test_zero_profiles_give_flat_model():
    m = accidental_model(*profiles(), RATES, AXIS)
    flat = 1e4 * 2e4 * 3e4 * AXIS.bin_width_s**2
    assert m.flat == pytest.approx(flat)
    assert np.allclose(m.values, flat, rtol=1e-12)


def test_single_ridge():
    m = accidental_model(*profiles((2.0, 0, 0)), RATES, AXIS)
    n = AXIS.n_side
    height = 3e4 * 2.0 * AXIS.bin_width_s
    assert np.allclose(m.values[n, :], height + m.flat)
    off = np.delete(m.values, n, axis=0)
    assert np.allclose(off, m.flat)


def test_three_ridges_cross_at_center():
    p = (2.0, 3.0, 5.0)
    m = accidental_model(*profiles(p), RATES, AXIS)
    dt = AXIS.bin_width_s
    # R3 c12 dT + R2 c13 dT + R1 c23 dT + R1 R2 R3 dT^2, evaluated by hand
    want = 3e4 * 2.0 * dt + 2e4 * 3.0 * dt + 1e4 * 5.0 * dt + 1e4 * 2e4 * 3e4 * dt**2
    assert m.at(0, 0) == pytest.approx(want, rel=1e-12)
    n = AXIS.n_side
    # ridge geometry: argmax along row, column and diagonal on the predicted lines
    assert np.argmax(m.ridge_12[:, 0]) == n
    assert np.argmax(m.ridge_13[0, :]) == n
    assert m.ridge_23[3, 3] == pytest.approx(1e4 * 5.0 * dt)
    assert m.ridge_23[3, 4] == 0


@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_model_is_sum_of_components(peaks):
    m = accidental_model(*profiles(tuple(peaks)), RATES, AXIS)
    total = m.ridge_12 + m.ridge_13 + m.ridge_23 + m.flat
    assert np.array_equal(m.values, total)


def test_axis_and_channel_checks():
    p12, p13, p23 = profiles()
    with pytest.raises(AxisMismatch):
        accidental_model(p13, p12, p23, RATES, AXIS)
    with pytest.raises(AxisMismatch):
        accidental_model(p12, p13, p23, RATES, HistogramAxis.centered(500, 4))


def test_diagonal_lookup_outside_range_is_zero():
    ax = HistogramAxis.centered(500, 2)
    v = np.ones(ax.n_bins)
    prof = correlated_part(pair(2, 3, v, axis=ax), SinglesRates((0, 0, 0), T_PS), exclusion_radius=2)
    assert prof.at_bins(np.array([-3, -2, 0, 2, 3])).tolist() == [0, 1, 1, 1, 0]


def _model(flat=2.0):
    z = np.zeros((AXIS.n_bins, AXIS.n_bins))
    return AccidentalModel(AXIS, z, z.copy(), z.copy(), flat)


def test_normalized_equals_one_when_measured_matches():
    m = _model(0.25)
    measured = TripleHistogram(AXIS, np.full(m.values.shape, 0.25 * 100), T_PS)
    g = normalized_g3(measured, m)
    assert np.allclose(g.values, 1.0) and not g.mask.any()
    assert g.center() == pytest.approx(1.0)


def test_masking():
    m = _model(0.0)
    ridge = np.zeros_like(m.values)
    ridge[AXIS.n_side, :] = 1.0
    m = AccidentalModel(AXIS, ridge, m.ridge_13, m.ridge_23, 0.0)
    measured = TripleHistogram(AXIS, np.ones(m.values.shape), T_PS)
    g = normalized_g3(measured, m, floor=0.5)
    assert g.mask.sum() == AXIS.n_bins**2 - AXIS.n_bins
    assert np.all(np.isnan(g.values[g.mask]))
    assert np.all(np.isfinite(g.unmasked()))
    with pytest.raises(ValueError):
        normalized_g3(measured, m, floor=0.0)
    with pytest.raises(AxisMismatch):
        normalized_g3(TripleHistogram(HistogramAxis.centered(500, 3), np.ones((7, 7)), T_PS), m)


def test_scale_covariance():
    m = _model(0.3)
    counts = np.random.default_rng(1).poisson(30, size=m.values.shape)
    a = normalized_g3(TripleHistogram(AXIS, counts, T_PS), m)
    b = normalized_g3(TripleHistogram(AXIS, 2 * counts, 2 * T_PS), m)
    assert np.allclose(a.values, b.values, rtol=1e-14)


def _pmf(n, lam):
    return math.exp(-lam + n * math.log(lam) - math.lgamma(n + 1))


def hand_tail(observed, lam):
    """1 - sum_{n < observed} pmf, or the direct upper sum when that cancels badly."""
    head = math.fsum(_pmf(n, lam) for n in range(observed))
    if head < 0.5:
        return 1.0 - head
    return math.fsum(_pmf(n, lam) for n in range(observed, observed + 400))


def test_poisson_tail_examples():
    assert poisson_tail(0, 3.0) == 1.0
    # lam = 2, observed 12: 1 - CDF(11; 2)
    assert poisson_tail(12, 2.0) == pytest.approx(1.3646151596e-06, rel=1e-9)
    assert poisson_tail(12, 2.0) == pytest.approx(hand_tail(12, 2.0), abs=1e-10)
    assert poisson_tail(1000, 1000.0) == pytest.approx(0.5, abs=0.02)


@given(st.integers(0, 120), st.floats(0.01, 50))
def test_poisson_tail_matches_hand_sum(observed, lam):
    assert abs(poisson_tail(observed, lam) - hand_tail(observed, lam)) < 1e-10


def test_peak_significance():
    m = _model(1e-3)
    counts = np.zeros(m.values.shape)
    n = AXIS.n_side
    counts[n, n] = 5
    g = normalized_g3(TripleHistogram(AXIS, counts, 400 * 10**12), m)  # expected 0.4
    assert peak_significance(g) == pytest.approx(hand_tail(5, 0.4), rel=1e-9)
    masked = normalized_g3(TripleHistogram(AXIS, counts, 400 * 10**12), m, floor=1.0)
    with pytest.raises(MaskedCenter):
        peak_significance(masked)


def test_null_run_is_flat():
    cfg = SimConfig(pair_rate=1e3, eta=(0.3,) * 3, background=(1e4,) * 3, corr_sigma=100e-12, sim_time=200, rng_seed=31)
    res = analyze(simulate(cfg), AnalysisConfig(n_side=1000, t_pix=250_000, strip_halfwidth=1, exclusion_radius=1))
    vals = res.normalized.unmasked()
    z = (res.normalized.values - 1) / res.sigma
    # the unweighted bin mean is dominated by the background regions, which hold
    # only a few hundred expected counts per run; that sets the tolerance
    bg = res.coarse.partition.labels >= 4
    assert abs(vals.mean() - 1) < 4 / math.sqrt(res.expected_counts[bg].sum())
    assert np.nanmax(z[~res.normalized.mask]) < 5
    # correlated parts vanish away from the peak with the default treatment
    for prof in res.profiles.values():
        assert np.all(prof.values[np.abs(prof.axis.bin_indices) > 1] == 0)
