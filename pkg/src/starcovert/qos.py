"""Outage probabilities at Bob and Carol, the exponential integral, the
Carol interference level solving ``outage = kappa``, and the rate bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Beamformers, ChannelRealization, StarRisProfile, SystemParams

EULER_GAMMA = 0.57721566490153286060651209
_SERIES_LIMIT = 2.0
_CF_EPS = 1e-17
_CF_TINY = 1e-300


# --------------------------------------------------------------------------
# exponential integral


def _e1_series(z: float) -> float:
    terms = []
    term = 1.0
    k = 1
    while True:
        term *= -z / k
        t = term / k
        terms.append(t)
        if abs(t) < 1e-18 and k > z:
            break
        k += 1
    return -EULER_GAMMA - math.log(z) - math.fsum(terms)


def _e1_scaled_cf(z: float) -> float:
    """``exp(z) * E1(z)`` by the modified Lentz continued fraction."""
    b = z + 1.0
    c = 1.0 / _CF_TINY
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise RuntimeError(f"continued fraction for E1({z}) did not converge")


def _e1(z: float) -> float:
    if z <= _SERIES_LIMIT:
        return _e1_series(z)
    return math.exp(-z) * _e1_scaled_cf(z)


def e1_scaled(z: float) -> float:
    """``exp(z) * E1(z)`` for ``z > 0``; finite for arbitrarily large ``z``."""
    if not z > 0:
        raise ValueError("e1_scaled needs z > 0")
    if z <= _SERIES_LIMIT:
        return math.exp(z) * _e1_series(z)
    return _e1_scaled_cf(z)


def _expint_ei_scalar(x: float) -> float:
    if not x < 0:
        raise ValueError(f"expint_ei is implemented for x < 0 only, got {x}")
    return -_e1(-x)


def expint_ei(x):
    """Exponential integral ``Ei(x) = -int_{-x}^inf exp(-t)/t dt`` for ``x < 0``.

    Power series for ``|x| <= 2``, continued fraction beyond.
    """
    if np.ndim(x) == 0:
        return _expint_ei_scalar(float(x))
    return np.vectorize(_expint_ei_scalar, otypes=[float])(x)


# --------------------------------------------------------------------------
# link gains


@dataclass(frozen=True)
class LinkGains:
    """Instantaneous powers entering the outage and rate expressions (W/W)."""

    g_bb: float
    g_bc: float
    g_bj: float
    g_cc_sig: float
    g_cb: float

    def __post_init__(self):
        if min(self.g_bb, self.g_bc, self.g_bj, self.g_cc_sig, self.g_cb) < 0:
            raise ValueError("link gains must be nonnegative")


def link_gains(channels: ChannelRealization, profile: StarRisProfile,
               beamformers: Beamformers) -> LinkGains:
    bob = (np.conj(channels.h_rb) * profile.theta_r) @ channels.H_AR
    carol = (np.conj(channels.h_rc) * profile.theta_t) @ channels.H_AR
    w_b, w_c = beamformers.w_b, beamformers.w_c
    jam = np.sum(np.conj(channels.h_rb) * profile.theta_t * np.conj(channels.h_rc))
    return LinkGains(
        g_bb=float(abs(bob @ w_b) ** 2),
        g_bc=float(abs(bob @ w_c) ** 2),
        g_bj=float(abs(jam) ** 2),
        g_cc_sig=float(abs(carol @ w_c) ** 2),
        g_cb=float(abs(carol @ w_b) ** 2),
    )


# --------------------------------------------------------------------------
# outage


def bob_margin(gains: LinkGains, R_b: float, params: SystemParams) -> float:
    """Largest jamming power Bob tolerates at rate ``R_b`` (may be negative)."""
    snr_req = 2.0 ** R_b - 1.0
    num = gains.g_bb - snr_req * (gains.g_bc + params.sigma2_b)
    den = snr_req * gains.g_bj
    if den > 0:
        return num / den
    return math.inf if num >= 0 else -math.inf


def outage_bob(gains: LinkGains, R_b: float, params: SystemParams) -> float:
    """Probability that Bob's rate falls below ``R_b`` under uniform jamming."""
    if not R_b > 0:
        raise ValueError("R_b must be positive")
    ups = bob_margin(gains, R_b, params)
    if ups > params.P_j_max:
        return 0.0
    if ups < 0:
        return 1.0
    return 1.0 - ups / params.P_j_max


def carol_margin(gains: LinkGains, R_c: float, params: SystemParams) -> float:
    """Residual self-interference power Carol tolerates at rate ``R_c``."""
    snr_req = 2.0 ** R_c - 1.0
    return (gains.g_cc_sig - snr_req * (gains.g_cb + params.sigma2_c)) / snr_req


def carol_outage_from_margin(margin: float, phi_sic: float, P_j_max: float) -> float:
    """Outage at Carol as a function of her interference margin ``Gamma``."""
    if margin < 0:
        return 1.0
    scale = phi_sic * P_j_max
    if scale == 0:
        return 0.0
    s = margin / scale
    if s == 0:
        return 1.0
    # exp(-s) + s * Ei(-s) = exp(-s) * (1 - s * exp(s) E1(s))
    return max(0.0, math.exp(-s) * (1.0 - s * e1_scaled(s)))


def outage_carol(gains: LinkGains, R_c: float, params: SystemParams) -> float:
    """Probability that Carol's rate falls below ``R_c``.

    Randomness: ``P_j ~ Uniform(0, P_j_max)`` and ``|h_cc|^2`` exponential
    with mean ``phi_sic``.
    """
    if not R_c > 0:
        raise ValueError("R_c must be positive")
    return carol_outage_from_margin(carol_margin(gains, R_c, params),
                                    params.phi_sic, params.P_j_max)


def sigma_star(kappa: float, params: SystemParams, rtol: float = 1e-15):
    """Interference margin at which Carol's outage equals ``kappa`` (watts).

    Bisection on the strictly decreasing outage curve; the bracket starts at
    ``phi_sic * P_j_max`` and doubles until it straddles ``kappa``.
    """
    if not 0.0 < kappa < 1.0:
        raise ValueError(f"kappa must lie in (0, 1), got {kappa}")
    scale = params.phi_sic * params.P_j_max
    if scale == 0:
        return 0.0

    def resid(s):
        return carol_outage_from_margin(s * scale, params.phi_sic, params.P_j_max) - kappa

    lo, hi = 0.0, 1.0
    for _ in range(60):
        if resid(hi) < 0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise RuntimeError("could not bracket the outage level")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if resid(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    return 0.5 * (lo + hi) * scale


def bob_interference(gains: LinkGains, params: SystemParams) -> float:
    """Jamming level at Bob exceeded with probability ``iota``."""
    return gains.g_bj * params.P_j_max * (1.0 - params.iota)


def rate_bb(gains: LinkGains, params: SystemParams) -> float:
    """Covert rate Bob sustains with outage at most ``iota`` (bits/s/Hz)."""
    den = gains.g_bc + bob_interference(gains, params) + params.sigma2_b
    return math.log2(1.0 + gains.g_bb / den)


def rate_cc(gains: LinkGains, params: SystemParams, sigma_star_val: float) -> float:
    """Public rate Carol sustains with outage at most ``kappa``."""
    den = gains.g_cb + sigma_star_val + params.sigma2_c
    return math.log2(1.0 + gains.g_cc_sig / den)
