"""Seeded test cases and the oracle check suite run by ``starcovert validate``.

Each check compares a closed form with its brute-force counterpart from
:mod:`starcovert.oracle` and reports the measured error next to its
tolerance.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import detection, oracle, qos
from .model import Beamformers, StarRisProfile, SystemParams, crandn, sample_channels
from .problem import make_instance

COVERAGE = 0.95


@dataclass
class Check:
    name: str
    passed: bool
    error: float
    tol: float
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<22} error={self.error:.3e}  tol={self.tol:.1e}  ({self.seconds:.1f}s)"


# --------------------------------------------------------------------------
# case generators


def random_profile(rng: np.random.Generator, N: int, lo: float = 0.05, hi: float = 0.95):
    return StarRisProfile(rng.uniform(lo, hi, N), rng.uniform(0, 2 * np.pi, N),
                          rng.uniform(0, 2 * np.pi, N))


def collinear_dep_case(seed: int, base: SystemParams | None = None):
    """A design whose two beams share a direction, with random power scales.

    Powers and the jamming budget are drawn log-uniformly over four decades
    so the DEP statistics span the same range. Returns
    ``(params, channels, profile, beamformers)``.
    """
    base = base or SystemParams()
    rng = np.random.default_rng([seed, 11])
    scale = 10.0 ** rng.uniform(-2, 2)
    params = base.replace(P_max=scale, P_j_max=10.0 ** rng.uniform(-2, 2))
    channels = sample_channels(params, [seed, 12])
    profile = random_profile(rng, params.N)
    u = crandn(rng, params.M)
    u /= np.linalg.norm(u)
    vb, vc = rng.uniform(0.05, 1.0, 2) * scale
    w_b = math.sqrt(vb) * u
    w_c = math.sqrt(vc) * u * np.exp(1j * rng.uniform(0, 2 * np.pi))
    return params, channels, profile, Beamformers.from_complex(w_b, w_c)


def random_dep_params(seed: int, sigma2_w: float = 1e-13) -> detection.DepParams:
    """Random detectable statistics over several decades."""
    rng = np.random.default_rng([seed, 21])
    lam = 10.0 ** rng.uniform(-13, -9)
    lam_t = lam * (1.0 + 10.0 ** rng.uniform(-1.5, 1))
    span = lam_t * 10.0 ** rng.uniform(-2, 2)
    P_j_max = 10.0 ** rng.uniform(-1, 1)
    return detection.DepParams(lam, lam_t, span / P_j_max, P_j_max, sigma2_w)


def random_asymptotic(seed: int, base: SystemParams | None = None) -> detection.AsymptoticDep:
    base = base or SystemParams()
    rng = np.random.default_rng([seed, 31])
    return detection.AsymptoticDep(
        varpi_b=rng.uniform(0.01, 1.0) * base.P_max,
        varpi_c=rng.uniform(0.01, 1.0) * base.P_max,
        theta_r=rng.uniform(0.1, 0.9) * base.N,
        l_rw=base.l_rw,
        lambda_rw=base.l_rw * base.l_rc * base.N * rng.uniform(0.1, 0.9) * 10.0 ** rng.uniform(-1, 1),
        P_j_max=base.P_j_max * 10.0 ** rng.uniform(-2, 1),
        l_AR=base.l_AR)


def outage_case(seed: int, link: str, base: SystemParams | None = None):
    """Random design and a target rate whose outage lies strictly inside (0, 1).

    Returns ``(params, gains, R_target)``.
    """
    base = base or SystemParams()
    rng = np.random.default_rng([seed, 41 if link == "bob" else 42])
    params = base.replace(P_j_max=10.0 ** rng.uniform(-1, 1))
    channels = sample_channels(params, [seed, 43])
    profile = random_profile(rng, params.N)
    bf = Beamformers.from_complex(crandn(rng, params.M) * 0.5, crandn(rng, params.M) * 0.5)
    gains = qos.link_gains(channels, profile, bf)
    # target chosen so the closed form sits in its interior branch
    if link == "bob":
        P_j = rng.uniform(0.05, 0.95) * params.P_j_max
        sinr = gains.g_bb / (gains.g_bc + gains.g_bj * P_j + params.sigma2_b)
    else:
        h2 = params.phi_sic * rng.uniform(0.2, 3.0)
        sinr = gains.g_cc_sig / (gains.g_cb + h2 * params.P_j_max + params.sigma2_c)
    return params, gains, math.log2(1.0 + sinr)


def interior_point(instance, rng: np.random.Generator, margin: float = 0.05) -> np.ndarray:
    lo, hi = instance.x_min, instance.x_max
    span = hi - lo
    return rng.uniform(lo + margin * span, hi - margin * span)


def gradient_rel_error(G: np.ndarray, G_fd: np.ndarray) -> np.ndarray:
    """Infinity-norm relative error per function."""
    num = np.max(np.abs(G - G_fd), axis=1)
    den = np.maximum(np.max(np.abs(G), axis=1), 1e-300)
    return num / den


# --------------------------------------------------------------------------
# checks


def check_dep(configs: int, taus: int, samples: int, tol: float, seed: int = 0) -> Check:
    """Closed-form DEP against :func:`oracle.mc_dep` on collinear designs.

    Passes when every point is within ``tol`` and at least 95% of the points
    fall inside their own 95% interval.
    """
    worst, inside, total = 0.0, 0, 0
    for i in range(configs):
        params, ch, prof, bf = collinear_dep_case(seed + i)
        p = detection.dep_params(ch, prof, bf, params)
        t_star = detection.optimal_threshold(p)
        grid = np.geomspace(max(p.sigma2_w, t_star / 20), t_star * 5, taus)
        est = oracle.mc_dep(params, ch, prof, bf, grid, samples, seed=[seed, i])
        exact = np.atleast_1d(detection.dep(grid, p))
        for e, x in zip(est, exact):
            worst = max(worst, abs(e.value - x))
            inside += e.covers(float(x))
            total += 1
    coverage = inside / total
    return Check("mc_dep", worst <= tol and coverage >= COVERAGE, worst, tol,
                 {"coverage": coverage, "points": total})


def check_outage(configs: int, samples: int, tol: float, seed: int = 0) -> list:
    out = []
    for link, closed in (("bob", qos.outage_bob), ("carol", qos.outage_carol)):
        worst = 0.0
        for i in range(configs):
            params, gains, R = outage_case(seed + i, link)
            est = oracle.mc_outage(params, gains, R, link, samples, seed=[seed, i])
            worst = max(worst, abs(est.value - closed(gains, R, params)))
        out.append(Check(f"mc_outage_{link}", worst <= tol, worst, tol))
    return out


def check_threshold(configs: int, grid: int, seed: int = 0, dep_slack: float = 1e-4) -> Check:
    """Grid minimum within two log-steps of the closed-form threshold."""
    worst_steps, worst_gap = 0.0, -math.inf
    for i in range(configs):
        p = random_dep_params(seed + i)
        tau_g, dep_g, step = oracle.grid_min_threshold(p, grid)
        t_star = detection.optimal_threshold(p)
        steps = abs(math.log(tau_g / t_star)) / math.log1p(step)
        worst_steps = max(worst_steps, steps)
        worst_gap = max(worst_gap, detection.min_dep(p) - dep_g)
    ok = worst_steps <= 2.0 and worst_gap <= dep_slack
    return Check("grid_min_threshold", ok, worst_steps, 2.0, {"max_min_dep_excess": worst_gap})


def check_gradients(points: int, h_rel: float, tol: float, seed: int = 0,
                    params: SystemParams | None = None) -> Check:
    params = params or SystemParams()
    rng = np.random.default_rng([seed, 51])
    inst = make_instance(params, sample_channels(params, [seed, 52]))
    worst = 0.0
    for _ in range(points):
        x = interior_point(inst, rng)
        G = inst.evaluate(x)[1]
        worst = max(worst, float(np.max(gradient_rel_error(G, oracle.fd_gradient(inst, x, h_rel)))))
    return Check("fd_gradient", worst <= tol, worst, tol)


def check_average(configs: int, samples: int, tol: float, seed: int = 0) -> Check:
    worst = 0.0
    for i in range(configs):
        a = random_asymptotic(seed + i)
        quad = detection.avg_min_dep_numeric(a)
        est = oracle.mc_avg_min_dep(a, samples, seed=[seed, i])
        worst = max(worst, abs(quad - est.value))
    return Check("avg_min_dep", worst <= tol, worst, tol)


def run_checks(settings: dict, seed: int = 0) -> list:
    """Run the whole suite with the sample counts in ``settings``."""
    steps = [
        lambda: [check_dep(settings["dep_configs"], settings["dep_taus"],
                           settings["dep_samples"], settings["dep_tol"], seed)],
        lambda: check_outage(settings["outage_configs"], settings["outage_samples"],
                             settings["outage_tol"], seed),
        lambda: [check_threshold(settings["grid_configs"], settings["grid_points"], seed)],
        lambda: [check_gradients(settings["fd_points"], settings["fd_h_rel"],
                                 settings["fd_tol"], seed)],
        lambda: [check_average(settings["avg_configs"], settings["avg_samples"],
                               settings["avg_tol"], seed)],
    ]
    report = []
    for step in steps:
        t0 = time.perf_counter()
        checks = step()
        dt = (time.perf_counter() - t0) / len(checks)
        for c in checks:
            c.seconds = dt
        report.extend(checks)
    return report


def asymptotic_gap(N: int, draws: int, M: int = 2, seed: int = 0,
                   varpi_b: float = 0.3, varpi_c: float = 0.7) -> float:
    """Mean ``|min_dep(exact) - asymptotic_min_dep|`` over channel draws.

    The design is fixed (half split on every element, equal-power beams)
    and both sides use the realized jamming gain, so the gap measures only
    the large-system replacement of ``lam`` and ``lam_t``.
    """
    params = SystemParams(N=N, M=M)
    profile = StarRisProfile(np.full(N, 0.5), np.zeros(N), np.zeros(N))
    bf = Beamformers(np.full(M, math.sqrt(varpi_b / M)), np.full(M, math.sqrt(varpi_c / M)),
                     np.zeros(M), np.zeros(M))
    gaps = np.empty(draws)
    for d in range(draws):
        ch = sample_channels(params, [seed, N, d])
        p = detection.dep_params(ch, profile, bf, params)
        a = detection.asymptotic_params(ch, profile, bf, params)
        gaps[d] = abs(detection.min_dep(p) - detection.asymptotic_min_dep(a, p.gamma))
    return float(np.mean(gaps))
