"""Willie's radiometer: received power, detection error probability (DEP),
the worst-case threshold and the large-system covertness measures.

Under either hypothesis Willie's average power is ``E + gamma * P_j +
sigma2_w`` with ``E`` exponential (mean ``lam`` under H0, ``lam_t`` under
H1) and ``P_j ~ Uniform(0, P_j_max)``. The DEP is the unweighted sum of the
false-alarm and missed-detection probabilities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .model import Beamformers, ChannelRealization, StarRisProfile, SystemParams

DEGENERATE_RTOL = 1e-12
QUAD_UPPER = 40.0


@dataclass(frozen=True)
class DepParams:
    """Statistics Willie's DEP depends on.

    lam, lam_t : mean power of the public-only / combined signal term (W).
    gamma : jamming gain ``|h_rw^H Theta_t conj(h_rc)|^2``.
    """

    lam: float
    lam_t: float
    gamma: float
    P_j_max: float
    sigma2_w: float

    def __post_init__(self):
        if self.lam < 0 or self.gamma < 0 or self.P_j_max < 0 or self.sigma2_w < 0:
            raise ValueError("DepParams entries must be nonnegative")
        if self.lam_t < self.lam * (1 - 1e-12):
            raise ValueError("lam_t must be >= lam")

    @property
    def jam_span(self) -> float:
        """Width ``gamma * P_j_max`` of the uniform jamming term."""
        return self.gamma * self.P_j_max

    @property
    def undetectable(self) -> bool:
        return (self.lam_t - self.lam) <= DEGENERATE_RTOL * self.lam_t

    def scaled(self, c: float) -> "DepParams":
        """All powers multiplied by ``c`` (``P_j_max`` carries the scale)."""
        return DepParams(c * self.lam, c * self.lam_t, self.gamma, c * self.P_j_max,
                         c * self.sigma2_w)


@dataclass(frozen=True)
class AsymptoticDep:
    """Large-system (N -> inf) quantities seen by Alice.

    ``varpi_b``/``varpi_c`` are the beamformer powers, ``theta_r`` is the
    total reflected power fraction ``sum(beta_r)`` and ``lambda_rw`` is the
    mean of the exponential jamming gain. ``l_AR``/``l_rw`` are the path
    gains of the Alice-RIS and RIS-Willie hops.
    """

    varpi_b: float
    varpi_c: float
    theta_r: float
    l_rw: float
    lambda_rw: float
    P_j_max: float
    l_AR: float

    @property
    def lam_a(self) -> float:
        return self.l_AR * self.l_rw * self.varpi_c * self.theta_r

    @property
    def lam_t_a(self) -> float:
        return self.l_AR * self.l_rw * self.theta_r * (self.varpi_b + self.varpi_c)

    def dep_params(self, gamma: float, sigma2_w: float = 0.0) -> DepParams:
        return DepParams(self.lam_a, self.lam_t_a, gamma, self.P_j_max, sigma2_w)


# --------------------------------------------------------------------------
# numerics helpers


def _log_expm1(x):
    """``log(exp(x) - 1)`` for ``x >= 0`` without overflow."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        small = np.log(np.expm1(np.minimum(x, 30.0)))
        large = x + np.log1p(-np.exp(-np.maximum(x, 30.0)))
    return np.where(x > 30.0, large, small)


def _scaled_log_expm1(A, mu):
    """``mu * log(expm1(A / mu))``; equals ``A`` in the limit ``mu -> 0``."""
    A = np.asarray(A, dtype=float)
    mu = np.asarray(mu, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = mu * _log_expm1(A / mu)
    return np.where(mu > 0, out, A)


def _exceed_prob(t, mu, A):
    """``P(E + U >= t)`` for ``E ~ Exp(mean mu)``, ``U ~ Uniform(0, A)``."""
    t = np.asarray(t, dtype=float)
    out = np.ones_like(t)
    pos = t > 0
    if A > 0:
        mid = pos & (t < A)
        tm = t[mid]
        if mu > 0:
            cdf_int = tm + mu * np.expm1(-tm / mu)   # int_0^t P(E <= s) ds
        else:
            cdf_int = tm
        out[mid] = 1.0 - cdf_int / A
        hi = pos & (t >= A)
        if mu > 0:
            # (mu / A) * exp(-t / mu) * expm1(A / mu), in log space
            out[hi] = (mu / A) * np.exp(_log_expm1(A / mu) - t[hi] / mu)
        else:
            out[hi] = 0.0
    else:
        out[pos] = np.exp(-t[pos] / mu) if mu > 0 else 0.0
    return out


# --------------------------------------------------------------------------
# received power


def rw_gain(channels: ChannelRealization, profile: StarRisProfile) -> float:
    """``||h_rw^H Theta_r||^2``."""
    return float(np.sum(np.abs(channels.h_rw) ** 2 * profile.beta_r))


def jamming_gain(channels: ChannelRealization, profile: StarRisProfile) -> float:
    """``gamma = |h_rw^H Theta_t conj(h_rc)|^2``."""
    s = np.sum(np.conj(channels.h_rw) * profile.theta_t * np.conj(channels.h_rc))
    return float(abs(s) ** 2)


def willie_avg_power(channels: ChannelRealization, profile: StarRisProfile,
                     beamformers: Beamformers, P_j: float, hypothesis: str,
                     sigma2_w: float) -> float:
    """Asymptotic (K -> inf) average power at Willie under ``"H0"``/``"H1"``."""
    if P_j < 0:
        raise ValueError(f"jamming power must be nonnegative, got {P_j}")
    a = np.conj(channels.h_rw) * profile.theta_r          # h_rw^H Theta_r
    row = a @ channels.H_AR
    public = abs(row @ beamformers.w_c) ** 2
    if hypothesis == "H0":
        sig = public
    elif hypothesis == "H1":
        sig = public + abs(row @ beamformers.w_b) ** 2
    else:
        raise ValueError(f"hypothesis must be 'H0' or 'H1', got {hypothesis!r}")
    return float(sig + jamming_gain(channels, profile) * P_j + sigma2_w)


def dep_params(channels: ChannelRealization, profile: StarRisProfile,
               beamformers: Beamformers, params: SystemParams) -> DepParams:
    """Willie's DEP statistics for a design, averaging over ``H_AR``.

    The means carry ``l_AR`` because the stored ``H_AR`` includes it.
    """
    g = channels.l_AR * rw_gain(channels, profile)
    vb = float(np.sum(beamformers.omega_b ** 2))
    vc = float(np.sum(beamformers.omega_c ** 2))
    return DepParams(g * vc, g * (vb + vc), jamming_gain(channels, profile),
                     params.P_j_max, params.sigma2_w)


def asymptotic_params(channels: ChannelRealization, profile: StarRisProfile,
                      beamformers: Beamformers, params: SystemParams) -> AsymptoticDep:
    lambda_rw = channels.l_rw * float(np.sum(profile.beta_t * np.abs(channels.h_rc) ** 2))
    return AsymptoticDep(
        varpi_b=float(np.sum(beamformers.omega_b ** 2)),
        varpi_c=float(np.sum(beamformers.omega_c ** 2)),
        theta_r=float(np.sum(profile.beta_r)),
        l_rw=channels.l_rw, lambda_rw=lambda_rw,
        P_j_max=params.P_j_max, l_AR=channels.l_AR)


# --------------------------------------------------------------------------
# DEP, threshold, minimum


def dep(tau, p: DepParams):
    """Detection error probability at threshold ``tau`` (vectorized)."""
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr < 0):
        raise ValueError("threshold must be nonnegative")
    if p.undetectable:
        out = np.ones_like(tau_arr)
    else:
        t = tau_arr - p.sigma2_w
        A = p.jam_span
        false_alarm = _exceed_prob(t, p.lam, A)
        missed = 1.0 - _exceed_prob(t, p.lam_t, A)
        out = np.clip(false_alarm + missed, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def _lam_log_delta(lam, lam_t, A):
    """``lam * ln(Delta)`` with its small-``A`` and ``lam -> 0`` limits."""
    A = np.asarray(A, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        general = _scaled_log_expm1(A, lam) - lam * _log_expm1(A / lam_t)
        at_zero = lam * np.log(lam_t / lam) if lam > 0 else 0.0
    return np.where(A > 0, general, at_zero)


def optimal_threshold(p: DepParams) -> float:
    """Willie's DEP-minimizing threshold.

    Returns ``inf`` when the two hypotheses coincide (the DEP is then 1 for
    every threshold and ``inf`` attains it).
    """
    if p.undetectable:
        return math.inf
    gap = p.lam_t - p.lam
    lld = float(_lam_log_delta(p.lam, p.lam_t, p.jam_span))
    return p.sigma2_w + p.lam_t * lld / gap


def _min_dep_core(lam, lam_t, A):
    """Minimum DEP for scalar means and an array of jam spans ``A``."""
    A = np.asarray(A, dtype=float)
    gap = lam_t - lam
    if gap <= DEGENERATE_RTOL * lam_t:
        return np.ones_like(A)
    lld = _lam_log_delta(lam, lam_t, A)
    with np.errstate(divide="ignore", invalid="ignore"):
        # (gap / A) * expm1(A / lam_t) * Delta^(-lam / gap)
        log_term = np.log(gap) - np.log(A) + _log_expm1(A / lam_t) - lld / gap
        zero_A = np.log(gap / lam_t) - lld / gap
    out = 1.0 - np.exp(np.where(A > 0, log_term, zero_A))
    return np.clip(out, 0.0, 1.0)


def min_dep(p: DepParams) -> float:
    """DEP at the optimal threshold."""
    return float(_min_dep_core(p.lam, p.lam_t, p.jam_span))


def asymptotic_min_dep(a: AsymptoticDep, gamma):
    """Minimum DEP with the large-system means, as a function of ``gamma``."""
    gamma = np.asarray(gamma, dtype=float)
    out = _min_dep_core(a.lam_a, a.lam_t_a, gamma * a.P_j_max)
    return float(out) if out.ndim == 0 else out


def avg_min_dep_numeric(a: AsymptoticDep, epsabs: float = 1e-9) -> float:
    """Average of :func:`asymptotic_min_dep` over ``gamma ~ Exp(lambda_rw)``.

    Integrated in ``u = gamma / lambda_rw`` over ``(0, 40]``; the neglected
    tail is below ``exp(-40)``. The integrand moves on the scale
    ``u_c = lam_t_a / (lambda_rw P_j_max)``, which can be far below 1, so the
    interval is split at decades of ``u_c``.
    """
    if not a.lambda_rw > 0:
        raise ValueError("lambda_rw must be positive")
    rate = a.lambda_rw * a.P_j_max

    def integrand(u):
        return float(_min_dep_core(a.lam_a, a.lam_t_a, u * rate)) * math.exp(-u)

    u_c = a.lam_t_a / rate if rate > 0 else QUAD_UPPER
    cuts = [u_c * 10.0 ** j for j in range(-4, 5)]
    edges = [0.0] + sorted(c for c in cuts if 0.0 < c < QUAD_UPPER) + [QUAD_UPPER]
    total, err_total, nev = 0.0, 0.0, 0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, err, info = integrate.quad(integrand, lo, hi, epsabs=epsabs / len(edges),
                                        epsrel=0.0, limit=200, full_output=True)[:3]
        total += val
        err_total += err
        nev += info["neval"]
    if err_total > 1e-6:
        raise RuntimeError(f"quadrature did not converge: estimate={total}, "
                           f"error={err_total}, evaluations={nev}")
    return total


def dep_lower_bound(a: AsymptoticDep):
    """Closed-form lower bound on :func:`avg_min_dep_numeric`.

    Smooth in all inputs; equals ``1 - varpi_b / varpi * log1p(u) / u`` with
    ``u = P_j_max * lambda_rw / lam_t_a``.
    """
    total = a.varpi_b + a.varpi_c
    if a.varpi_b <= 0:
        return 1.0
    lam_t = a.lam_t_a
    u = a.P_j_max * a.lambda_rw / lam_t if lam_t > 0 else math.inf
    return 1.0 - (a.varpi_b / total) * _log1p_ratio(u)


def _log1p_ratio(u):
    """``log1p(u) / u`` with the value 1 at 0 and 0 at infinity."""
    if u == 0:
        return 1.0
    if math.isinf(u):
        return 0.0
    if abs(u) < 1e-8:
        return 1.0 - u / 2.0
    return math.log1p(u) / u
