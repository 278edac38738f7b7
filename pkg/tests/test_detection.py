import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from starcovert import detection, oracle, validation
from starcovert.detection import AsymptoticDep, DepParams
from starcovert.model import Beamformers, StarRisProfile, SystemParams, sample_channels


# Straight transcription of the piecewise DEP and its minimum, in plain math.
# Used only where nothing overflows (moderate ratios of the powers).

def dep_piecewise(tau, lam, lam_t, A, s2):
    if tau < s2:
        return 1.0
    t = tau - s2
    psi = (lam_t * math.exp(-t / lam_t) - lam * math.exp(-t / lam)) / A
    if t <= A:
        return 1.0 + psi + (lam - lam_t) / A
    chi = -tau + s2 + A
    return 1.0 + psi + (lam * math.exp(chi / lam) - lam_t * math.exp(chi / lam_t)) / A


def tau_star_plain(lam, lam_t, A, s2):
    delta = (math.exp(A / lam) - 1) / (math.exp(A / lam_t) - 1)
    return lam_t * lam / (lam_t - lam) * math.log(delta) + s2


def min_dep_plain(lam, lam_t, A):
    delta = (math.exp(A / lam) - 1) / (math.exp(A / lam_t) - 1)
    num = (lam_t * (math.exp(A / lam_t) - 1) * delta ** (lam / (lam - lam_t))
           - lam * (math.exp(A / lam) - 1) * delta ** (lam_t / (lam - lam_t)))
    return 1.0 - num / A


moderate = st.tuples(st.floats(0.2, 5.0), st.floats(1.05, 4.0), st.floats(0.1, 8.0),
                     st.floats(0.0, 0.5))


def _params(lam, ratio, A, s2):
    return DepParams(lam, lam * ratio, A, 1.0, s2)


@given(moderate, st.floats(0.0, 1.0))
def test_dep_matches_piecewise_transcription(args, frac):
    lam, ratio, A, s2 = args
    p = _params(*args)
    tau = s2 + frac * 3.0 * (A + 5 * lam * ratio)
    assert detection.dep(tau, p) == pytest.approx(dep_piecewise(tau, lam, lam * ratio, A, s2),
                                                  abs=1e-12)


def test_printed_third_branch_sign_would_break_continuity():
    lam, lam_t, A, s2 = 1.0, 2.0, 1.5, 0.1
    t = A
    psi = (lam_t * math.exp(-t / lam_t) - lam * math.exp(-t / lam)) / A
    chi = -(s2 + t) + s2 + A
    plus = 1.0 + psi + (lam * math.exp(chi / lam) + lam_t * math.exp(chi / lam_t)) / A
    middle = 1.0 + psi + (lam - lam_t) / A
    assert abs(plus - middle) > 1.0
    assert dep_piecewise(s2 + t + 1e-12, lam, lam_t, A, s2) == pytest.approx(middle, abs=1e-9)


@given(moderate)
def test_threshold_and_minimum_match_transcription(args):
    lam, ratio, A, s2 = args
    p = _params(*args)
    assert detection.optimal_threshold(p) == pytest.approx(
        tau_star_plain(lam, lam * ratio, A, s2), rel=1e-10)
    assert detection.min_dep(p) == pytest.approx(min_dep_plain(lam, lam * ratio, A), abs=1e-10)


def test_min_dep_frozen_value():
    # high-precision direct minimization of the DEP
    p = DepParams(1.0, 2.0, 1.5, 1.0, 0.0)
    assert detection.min_dep(p) == pytest.approx(0.7610950678, abs=1e-9)
    assert min_dep_plain(1.0, 2.0, 1.5) == pytest.approx(0.7610950678, abs=1e-9)


def test_below_noise_floor_is_one():
    p = validation.random_dep_params(3)
    assert detection.dep(p.sigma2_w / 2, p) == 1.0
    assert detection.dep(0.0, p) == 1.0


def test_undetectable_is_one_everywhere():
    p = DepParams(2e-12, 2e-12, 0.3, 1.0, 1e-13)
    taus = np.geomspace(1e-14, 1e-9, 50)
    assert np.all(detection.dep(taus, p) == 1.0)
    assert detection.min_dep(p) == 1.0
    assert detection.optimal_threshold(p) == math.inf


def test_negative_threshold_rejected():
    with pytest.raises(ValueError):
        detection.dep(-1.0, validation.random_dep_params(0))


def test_lam_t_below_lam_rejected():
    with pytest.raises(ValueError):
        DepParams(2.0, 1.0, 1.0, 1.0, 0.0)


@pytest.mark.parametrize("seed", range(10))
def test_branch_continuity(seed):
    p = validation.random_dep_params(seed)
    for edge in (p.sigma2_w, p.sigma2_w + p.jam_span):
        h = edge * 1e-12
        assert detection.dep(edge + h, p) == pytest.approx(detection.dep(max(edge - h, 0), p),
                                                           abs=1e-9)


@given(st.integers(0, 10_000), st.floats(0.0, 1.0))
def test_dep_in_unit_interval(seed, frac):
    p = validation.random_dep_params(seed)
    tau = p.sigma2_w + frac * 10 * (p.jam_span + p.lam_t)
    assert 0.0 <= detection.dep(tau, p) <= 1.0


def test_min_dep_is_dep_at_threshold():
    for seed in range(100):
        p = validation.random_dep_params(seed)
        t = detection.optimal_threshold(p)
        assert detection.min_dep(p) == pytest.approx(detection.dep(t, p), abs=1e-9)


def test_min_dep_below_dep_everywhere(rng):
    for i in range(1000):
        p = validation.random_dep_params(i)
        tau = p.sigma2_w + rng.uniform(0, 5) * (p.jam_span + p.lam_t)
        assert detection.min_dep(p) <= detection.dep(tau, p) + 1e-12


def test_threshold_beyond_jam_span():
    for seed in range(100):
        p = validation.random_dep_params(seed)
        assert detection.optimal_threshold(p) >= p.sigma2_w + p.jam_span * (1 - 1e-12)


@given(st.integers(0, 1000), st.floats(1e-3, 1e3))
def test_scaling_homogeneity(seed, c):
    p = validation.random_dep_params(seed)
    q = p.scaled(c)
    assert detection.min_dep(q) == pytest.approx(detection.min_dep(p), abs=1e-10)
    assert detection.optimal_threshold(q) == pytest.approx(c * detection.optimal_threshold(p),
                                                           rel=1e-9)


def test_min_dep_decreases_in_covert_power():
    lam, A = 1e-11, 3e-11
    values = [detection.min_dep(DepParams(lam, lam + vb, 1.0, A, 1e-13))
              for vb in np.geomspace(1e-13, 1e-9, 50)]
    assert np.all(np.diff(values) <= 1e-12)


def test_zero_jamming_limit():
    # A -> 0 gives 1 - (lam_t - lam)/lam_t * (lam/lam_t)^(lam/(lam_t - lam))
    lam, lam_t = 1.0, 3.0
    ref = 1.0 - (lam_t - lam) / lam_t * (lam / lam_t) ** (lam / (lam_t - lam))
    assert detection.min_dep(DepParams(lam, lam_t, 1.0, 0.0, 0.0)) == pytest.approx(ref, abs=1e-12)
    assert detection.min_dep(DepParams(lam, lam_t, 1.0, 1e-9, 0.0)) == pytest.approx(ref, abs=1e-8)


def test_zero_public_power_limit():
    # lam -> 0: 1 - (lam_t / A)(1 - exp(-A / lam_t))
    lam_t, A = 2.0, 3.0
    ref = 1.0 - lam_t / A * (1.0 - math.exp(-A / lam_t))
    assert detection.min_dep(DepParams(0.0, lam_t, 1.0, A, 0.0)) == pytest.approx(ref, abs=1e-12)
    assert detection.min_dep(DepParams(1e-9, lam_t, 1.0, A, 0.0)) == pytest.approx(ref, abs=1e-7)


def test_large_span_is_finite():
    p = DepParams(1e-12, 2e-12, 1.0, 1e-9, 1e-13)
    v = detection.min_dep(p)
    assert 0.99 < v <= 1.0
    assert math.isfinite(detection.optimal_threshold(p))


# --------------------------------------------------------------------------
# Willie's average power


def _design(params, rng):
    prof = validation.random_profile(rng, params.N)
    bf = Beamformers.from_complex(
        (rng.normal(size=params.M) + 1j * rng.normal(size=params.M)) * 0.3,
        (rng.normal(size=params.M) + 1j * rng.normal(size=params.M)) * 0.3)
    return prof, bf


def test_willie_power_noise_only(params, channels):
    prof = StarRisProfile(np.zeros(params.N), np.zeros(params.N), np.zeros(params.N))
    bf = Beamformers.from_complex(np.zeros(params.M), np.zeros(params.M))
    for h in ("H0", "H1"):
        assert detection.willie_avg_power(channels, prof, bf, 0.0, h, 1e-13) == 1e-13


def test_willie_power_h1_minus_h0(params, channels, rng):
    prof, bf = _design(params, rng)
    diff = (detection.willie_avg_power(channels, prof, bf, 0.4, "H1", 1e-13)
            - detection.willie_avg_power(channels, prof, bf, 0.4, "H0", 1e-13))
    a = np.conj(channels.h_rw) * prof.theta_r
    assert diff == pytest.approx(abs(a @ channels.H_AR @ bf.w_b) ** 2, rel=1e-9)


def test_willie_power_bad_inputs(params, channels, rng):
    prof, bf = _design(params, rng)
    with pytest.raises(ValueError):
        detection.willie_avg_power(channels, prof, bf, -1.0, "H0", 1e-13)
    with pytest.raises(ValueError):
        detection.willie_avg_power(channels, prof, bf, 1.0, "H2", 1e-13)


@pytest.mark.parametrize("hyp", ["H0", "H1"])
def test_willie_power_against_symbol_average(params, channels, rng, hyp):
    prof, bf = _design(params, rng)
    closed = detection.willie_avg_power(channels, prof, bf, 0.7, hyp, 1e-13)
    est = oracle.mc_willie_power(channels, prof, bf, 0.7, hyp, 1e-13, symbols=1_000_000, seed=5)
    assert est == pytest.approx(closed, rel=5e-3)


def test_dep_params_gamma_matches_matrix_form(params, channels, rng):
    prof, _ = _design(params, rng)
    direct = abs(np.conj(channels.h_rw) @ prof.Theta_t @ np.conj(channels.h_rc)) ** 2
    assert detection.jamming_gain(channels, prof) == pytest.approx(direct, rel=1e-12)


# --------------------------------------------------------------------------
# large-system quantities


def test_asymptotic_substitution_identity(params, channels, rng):
    prof, bf = _design(params, rng)
    a = detection.asymptotic_params(channels, prof, bf, params)
    gamma = 3e-9
    q = DepParams(a.lam_a, a.lam_t_a, gamma, params.P_j_max, 0.0)
    assert detection.asymptotic_min_dep(a, gamma) == pytest.approx(detection.min_dep(q), abs=1e-15)
    assert a.dep_params(gamma).lam_t == a.lam_t_a


def test_asymptotic_gap_large_n():
    assert validation.asymptotic_gap(512, 1000, M=2) < 0.02


def test_asymptotic_gap_shrinks():
    small = validation.asymptotic_gap(16, 200)
    large = validation.asymptotic_gap(256, 200)
    assert large < small


@pytest.mark.parametrize("seed", range(5))
def test_average_in_unit_interval_and_above_bound(seed):
    a = validation.random_asymptotic(seed)
    avg = detection.avg_min_dep_numeric(a)
    assert 0.0 < avg <= 1.0
    assert detection.dep_lower_bound(a) < avg


def test_average_without_covert_power_is_one():
    base = SystemParams()
    a = AsymptoticDep(0.0, 0.5, 10.0, base.l_rw, 1e-9, 1.0, base.l_AR)
    assert detection.avg_min_dep_numeric(a) == pytest.approx(1.0, abs=1e-9)
    assert detection.dep_lower_bound(a) == 1.0


def test_average_with_negligible_jamming():
    # P_j_max -> 0: average tends to the zero-span minimum
    base = SystemParams()
    a = AsymptoticDep(0.3, 0.5, 10.0, base.l_rw, 1e-12, 1e-12, base.l_AR)
    ref = detection.min_dep(DepParams(a.lam_a, a.lam_t_a, 1.0, 0.0, 0.0))
    assert detection.avg_min_dep_numeric(a) == pytest.approx(ref, abs=1e-6)


def test_lower_bound_transcription():
    base = SystemParams()
    a = validation.random_asymptotic(7)
    lt = a.lam_t_a
    plain = 1 + (a.l_AR * a.l_rw * a.theta_r * a.varpi_b) / (a.P_j_max * a.lambda_rw) * math.log(
        lt / (lt + a.P_j_max * a.lambda_rw))
    assert detection.dep_lower_bound(a) == pytest.approx(plain, abs=1e-12)
    assert base.l_rw == a.l_rw


def test_average_matches_sample_mean():
    a = validation.random_asymptotic(11)
    est = oracle.mc_avg_min_dep(a, 200_000, seed=3)
    assert detection.avg_min_dep_numeric(a) == pytest.approx(est.value, abs=max(4 * est.half_width, 2e-3))


def test_large_system_dep_statistics_concentrate():
    # lam / lam_a -> 1 as N grows for a fixed split and beams
    ratios = []
    for N in (16, 1024):
        params = SystemParams(N=N, M=2)
        ch = sample_channels(params, [9, N])
        prof = StarRisProfile(np.full(N, 0.5), np.zeros(N), np.zeros(N))
        bf = Beamformers(np.full(2, 0.4), np.full(2, 0.5), np.zeros(2), np.zeros(2))
        p = detection.dep_params(ch, prof, bf, params)
        a = detection.asymptotic_params(ch, prof, bf, params)
        ratios.append(abs(p.lam / a.lam_a - 1))
    assert ratios[1] < ratios[0] or ratios[1] < 0.1
