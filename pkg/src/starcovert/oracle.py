"""Brute-force validators for the closed forms.

Nothing here reuses the formulas under test. Monte Carlo estimators draw in
fixed-size batches, each from its own ``SeedSequence`` child, and merge by
summing counts, so a result depends only on ``(seed, samples)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import detection
from .model import Beamformers, ChannelRealization, StarRisProfile, SystemParams, crandn
from .qos import LinkGains, link_gains

BATCH = 100_000
Z95 = 1.959963984540054


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo estimate with a 95% confidence interval."""

    value: float
    lo: float
    hi: float
    samples: int

    @property
    def half_width(self) -> float:
        return 0.5 * (self.hi - self.lo)

    def covers(self, x: float, slack: float = 0.0) -> bool:
        return self.lo - slack <= x <= self.hi + slack


def binomial_ci(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Normal-approximation interval, Wilson when fewer than 10 hits or misses."""
    if n <= 0:
        raise ValueError("need at least one sample")
    p = k / n
    if min(k, n - k) < 10:
        den = 1.0 + z * z / n
        centre = (p + z * z / (2 * n)) / den
        half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
        return max(0.0, centre - half), min(1.0, centre + half)
    half = z * math.sqrt(p * (1 - p) / n)
    return max(0.0, p - half), min(1.0, p + half)


def _proportion(k: int, n: int) -> Estimate:
    lo, hi = binomial_ci(k, n)
    return Estimate(k / n, lo, hi, n)


def _sum_of_proportions(a: Estimate, b: Estimate) -> Estimate:
    # independent samples: combine the one-sided widths in quadrature
    v = a.value + b.value
    lo = v - math.hypot(a.value - a.lo, b.value - b.lo)
    hi = v + math.hypot(a.hi - a.value, b.hi - b.value)
    return Estimate(v, lo, hi, a.samples + b.samples)


def _batches(samples: int, seed, batch: int = BATCH):
    """Yield ``(size, Generator)`` per batch; children of one SeedSequence."""
    if samples < 1:
        raise ValueError("samples must be positive")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    n_batches = -(-samples // batch)
    for i, child in enumerate(ss.spawn(n_batches)):
        size = min(batch, samples - i * batch)
        yield size, np.random.default_rng(child)


# --------------------------------------------------------------------------
# detection error probability


def willie_power_samples(channels: ChannelRealization, profile: StarRisProfile,
                         beamformers: Beamformers, hypothesis: str, sigma2_w: float,
                         P_j_max: float, size: int, rng: np.random.Generator,
                         full_channel: bool = False) -> np.ndarray:
    """Willie's average power for ``size`` fresh draws of ``H_AR`` and ``P_j``.

    With ``full_channel`` every draw is a whole ``N x M`` matrix. Otherwise
    only the row ``a^T H_AR`` that Willie sees is drawn: for fixed ``a`` its
    entries are i.i.d. ``CN(0, l_AR ||a||^2)``, so the law is the same at
    ``M / (N M)`` of the cost.
    """
    if hypothesis not in ("H0", "H1"):
        raise ValueError(f"unknown hypothesis {hypothesis!r}")
    N, M = channels.N, channels.M
    a = np.conj(channels.h_rw) * profile.theta_r
    if full_channel:
        H = math.sqrt(channels.l_AR) * crandn(rng, (size, N, M))
        row = np.einsum("n,bnm->bm", a, H)
    else:
        row = math.sqrt(channels.l_AR * float(np.vdot(a, a).real)) * crandn(rng, (size, M))
    power = np.abs(row @ beamformers.w_c) ** 2
    if hypothesis == "H1":
        power = power + np.abs(row @ beamformers.w_b) ** 2
    jam = abs(np.sum(np.conj(channels.h_rw) * profile.theta_t * np.conj(channels.h_rc))) ** 2
    P_j = rng.uniform(0.0, P_j_max, size)
    return power + jam * P_j + sigma2_w


def mc_dep(params: SystemParams, channels: ChannelRealization, profile: StarRisProfile,
           beamformers: Beamformers, tau, samples: int = 10 ** 6, seed=0,
           full_channel: bool = False):
    """DEP by simulating Willie's radiometer over ``H_AR`` and ``P_j``.

    ``tau`` may be an array; all thresholds share the same draws. H0 and H1
    use independent halves of the stream. Returns one :class:`Estimate` per
    threshold (a list when ``tau`` is an array).
    """
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    fa = np.zeros(taus.size, dtype=np.int64)
    md = np.zeros(taus.size, dtype=np.int64)
    ss = np.random.SeedSequence(seed)
    s0, s1 = ss.spawn(2)
    for hyp, stream, counts in (("H0", s0, fa), ("H1", s1, md)):
        for size, rng in _batches(samples, stream):
            pw = np.sort(willie_power_samples(channels, profile, beamformers, hyp,
                                              params.sigma2_w, params.P_j_max, size, rng,
                                              full_channel))
            below = np.searchsorted(pw, taus, side="left")    # count of pw < tau
            counts += (size - below) if hyp == "H0" else below
    out = [_sum_of_proportions(_proportion(int(f), samples), _proportion(int(m), samples))
           for f, m in zip(fa, md)]
    return out[0] if np.ndim(tau) == 0 else out


def mc_dep_direct(p: detection.DepParams, tau, samples: int = 10 ** 6, seed=0):
    """Second DEP estimator: simulate the exponential and uniform terms.

    Formula-free; shares no code with :func:`mc_dep` beyond the batching.
    """
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    fa = np.zeros(taus.size, dtype=np.int64)
    md = np.zeros(taus.size, dtype=np.int64)
    s0, s1 = np.random.SeedSequence(seed).spawn(2)
    for mean, stream, counts, is_h0 in ((p.lam, s0, fa, True), (p.lam_t, s1, md, False)):
        for size, rng in _batches(samples, stream):
            e = rng.exponential(1.0, size) * mean
            u = rng.uniform(0.0, p.P_j_max, size) * p.gamma
            pw = np.sort(e + u + p.sigma2_w)
            below = np.searchsorted(pw, taus, side="left")
            counts += (size - below) if is_h0 else below
    out = [_sum_of_proportions(_proportion(int(f), samples), _proportion(int(m), samples))
           for f, m in zip(fa, md)]
    return out[0] if np.ndim(tau) == 0 else out


def mc_avg_min_dep(a: detection.AsymptoticDep, samples: int = 10 ** 6, seed=0) -> Estimate:
    """Mean of the large-system minimum DEP over ``gamma ~ Exp(lambda_rw)``."""
    total = 0.0
    total_sq = 0.0
    for size, rng in _batches(samples, seed):
        vals = detection.asymptotic_min_dep(a, rng.exponential(a.lambda_rw, size))
        total += float(np.sum(vals))
        total_sq += float(np.sum(vals * vals))
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    half = Z95 * math.sqrt(var / samples)
    return Estimate(mean, mean - half, mean + half, samples)


def grid_min_threshold(p: detection.DepParams, grid: int = 10 ** 5, tie_ulps: float = 4.0):
    """Exhaustive DEP minimum on a log grid over ``[sigma2_w (1 - 1e-3), 10 tau*]``.

    When the jamming span dwarfs ``lam_t`` the DEP has a long plateau left of
    its minimizer whose slope is below double precision. Grid values within
    ``tie_ulps`` units in the last place of the minimum count as ties and the
    rightmost one is returned, since the DEP only decreases across the
    plateau.

    Returns ``(tau_best, dep_best, log_step)`` where ``log_step`` is the
    ratio between neighbouring grid points minus one.
    """
    if grid < 2:
        raise ValueError("grid needs at least two points")
    tau_star = detection.optimal_threshold(p)
    if math.isinf(tau_star):
        return math.inf, 1.0, 0.0
    lo = p.sigma2_w * (1 - 1e-3) if p.sigma2_w > 0 else tau_star * 1e-6
    hi = 10.0 * tau_star
    taus = np.geomspace(lo, hi, grid)
    vals = detection.dep(taus, p)
    best = float(np.min(vals))
    i = int(np.flatnonzero(vals <= best + tie_ulps * np.spacing(best))[-1])
    return float(taus[i]), float(vals[i]), float(taus[1] / taus[0] - 1.0)


def mc_willie_power(channels: ChannelRealization, profile: StarRisProfile,
                    beamformers: Beamformers, P_j: float, hypothesis: str,
                    sigma2_w: float, symbols: int = 10 ** 6, seed=0) -> float:
    """Time average of ``|y_w[k]|^2`` over simulated unit-power symbols."""
    a = np.conj(channels.h_rw) * profile.theta_r
    row = a @ channels.H_AR
    jam = np.sum(np.conj(channels.h_rw) * profile.theta_t * np.conj(channels.h_rc))
    total = 0.0
    for size, rng in _batches(symbols, seed):
        y = (row @ beamformers.w_c) * crandn(rng, size)
        if hypothesis == "H1":
            y = y + (row @ beamformers.w_b) * crandn(rng, size)
        y = y + jam * math.sqrt(P_j) * crandn(rng, size) + math.sqrt(sigma2_w) * crandn(rng, size)
        total += float(np.sum(np.abs(y) ** 2))
    return total / symbols


# --------------------------------------------------------------------------
# outage


def mc_outage(params: SystemParams, gains: LinkGains, R_target: float, link: str,
              samples: int = 10 ** 6, seed=0) -> Estimate:
    """Fraction of draws whose instantaneous rate falls below ``R_target``.

    Bob sees ``P_j ~ Uniform(0, P_j_max)`` through ``g_bj``; Carol sees
    ``|h_cc|^2 P_j`` with ``|h_cc|^2`` exponential of mean ``phi_sic``.
    """
    if link not in ("bob", "carol"):
        raise ValueError(f"link must be 'bob' or 'carol', got {link!r}")
    hits = 0
    for size, rng in _batches(samples, seed):
        P_j = rng.uniform(0.0, params.P_j_max, size)
        if link == "bob":
            sinr = gains.g_bb / (gains.g_bc + gains.g_bj * P_j + params.sigma2_b)
        else:
            h2 = rng.exponential(params.phi_sic, size) if params.phi_sic > 0 else np.zeros(size)
            sinr = gains.g_cc_sig / (gains.g_cb + h2 * P_j + params.sigma2_c)
        hits += int(np.count_nonzero(np.log2(1.0 + sinr) < R_target))
    return _proportion(hits, samples)


def mc_outage_design(params: SystemParams, channels: ChannelRealization,
                     profile: StarRisProfile, beamformers: Beamformers, R_target: float,
                     link: str, samples: int = 10 ** 6, seed=0) -> Estimate:
    return mc_outage(params, link_gains(channels, profile, beamformers), R_target, link,
                     samples, seed)


# --------------------------------------------------------------------------
# gradients


def fd_gradient(instance, x, h_rel: float = 1e-6) -> np.ndarray:
    """Central differences of all four functions, step ``h_rel * range``.

    Coordinates with an empty range get a zero column.
    """
    x = np.asarray(x, dtype=float)
    span = np.asarray(instance.x_max, dtype=float) - np.asarray(instance.x_min, dtype=float)
    n = x.size
    G = np.zeros((4, n))
    for j in range(n):
        h = h_rel * span[j]
        if h <= 0:
            continue
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        fp = instance.evaluate(xp, want_grad=False)[0]
        fm = instance.evaluate(xm, want_grad=False)[0]
        G[:, j] = (np.asarray(fp) - np.asarray(fm)) / (2.0 * h)
    return G
