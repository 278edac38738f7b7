"""Globally convergent method of moving asymptotes (GCMMA).

Solves

    min  f_0(x) + a_0 z + sum_i c_i y_i
    s.t. f_i(x) - y_i <= 0,   i = 1..m
         x_min <= x <= x_max,  y >= 0,  z >= 0

with an outer loop of separable convex MMA approximations and an inner loop
that raises the conservative factors until every approximation upper-bounds
its function at the trial point. Each subproblem is solved by a primal-dual
interior-point method on its separable dual, which only factors an m x m
system.

Problems are duck-typed: anything with ``x_min``, ``x_max``, ``a_0``, ``c``
and ``evaluate(x, want_grad) -> (f, grad_or_None)`` works (see :class:`NLP`).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)

RHO_FLOOR = 1e-6
ASY_INIT = 0.5
ASY_INCR = 1.2
ASY_DECR = 0.7
ASY_MIN = 0.01
ASY_MAX = 10.0
ALBEFA = 0.1
MOVE = 0.5


class SubproblemError(RuntimeError):
    pass


@dataclass
class NLP:
    """Plain container for a problem given as a callable."""

    fun: Callable
    x_min: np.ndarray
    x_max: np.ndarray
    a_0: float = 1.0
    c: np.ndarray | float = 1e4

    def evaluate(self, x, want_grad=True):
        return self.fun(x, want_grad)

    def transformed_objective(self, f):
        f = np.asarray(f)
        return float(f[0] + np.sum(np.asarray(self.c) * np.maximum(f[1:], 0.0)))


# --------------------------------------------------------------------------
# approximation


@dataclass
class Approximation:
    """Separable convex model ``g_i(x) = sum p/(U-x) + q/(x-L) + r`` of each f_i.

    Stored relative to the expansion point so that ``g_i(x_hat) == f_hat``
    exactly and increments carry no cancellation error.
    """

    p: np.ndarray          # (m+1, n)
    q: np.ndarray          # (m+1, n)
    f_hat: np.ndarray      # (m+1,)
    x_hat: np.ndarray
    low: np.ndarray
    upp: np.ndarray

    @property
    def r(self) -> np.ndarray:
        return self.f_hat - (self.p @ (1.0 / (self.upp - self.x_hat))
                             + self.q @ (1.0 / (self.x_hat - self.low)))

    def value(self, x) -> np.ndarray:
        dx = x - self.x_hat
        ux = (self.upp - x) * (self.upp - self.x_hat)
        xl = (x - self.low) * (self.x_hat - self.low)
        return self.f_hat + self.p @ (dx / ux) - self.q @ (dx / xl)

    def gradient(self, x) -> np.ndarray:
        return self.p / (self.upp - x) ** 2 - self.q / (x - self.low) ** 2


def rho_init(grad, x_range) -> np.ndarray:
    """Initial conservative factor(s): ``max(0.1/n * |grad|.range, 1e-6)``.

    ``grad`` may be one gradient or a stack of them (one factor per row).
    """
    grad = np.asarray(grad, dtype=float)
    n = grad.shape[-1]
    val = (0.1 / n) * (np.abs(grad) @ np.asarray(x_range, dtype=float))
    return np.maximum(val, RHO_FLOOR)


def build_approximation(f_hat, grad, x_hat, low, upp, rho, x_min, x_max) -> Approximation:
    """MMA coefficients at ``x_hat`` with conservative factors ``rho``."""
    if np.any(low >= x_hat) or np.any(upp <= x_hat):
        raise AssertionError("asymptotes must straddle the expansion point")
    grad = np.atleast_2d(grad)
    rho = np.atleast_1d(rho)[:, None]
    inv_range = 1.0 / (x_max - x_min)
    pos = np.maximum(grad, 0.0)
    neg = np.maximum(-grad, 0.0)
    p = (upp - x_hat) ** 2 * (1.001 * pos + 0.001 * neg + rho * inv_range)
    q = (x_hat - low) ** 2 * (0.001 * pos + 1.001 * neg + rho * inv_range)
    return Approximation(p, q, np.atleast_1d(np.asarray(f_hat, dtype=float)), x_hat, low, upp)


def gcmma_distance(x, x_hat, low, upp, x_min, x_max) -> float:
    """Weighted squared distance that the inner loop divides the misfit by."""
    num = (upp - low) * (x - x_hat) ** 2
    den = (upp - x) * (x - low) * (x_max - x_min)
    return float(np.sum(num / den))


def conservative_check(f_t, g_t, tol: float = 1e-12) -> np.ndarray:
    """True where the approximation is *not* conservative (``f > g + tol``)."""
    return np.asarray(f_t) > np.asarray(g_t) + tol


def rho_update(rho, f_t, g_t, d):
    """Raise a conservative factor after a non-conservative trial point."""
    if d <= 0:
        return rho
    nu = (np.asarray(f_t) - np.asarray(g_t)) / d
    return np.minimum(1.1 * (rho + nu), 10.0 * rho)


def update_asymptotes(k, x, x_old1, x_old2, low, upp, x_min, x_max):
    rng = x_max - x_min
    if k < 2:
        return x - ASY_INIT * rng, x + ASY_INIT * rng
    trend = (x - x_old1) * (x_old1 - x_old2)
    gamma = np.where(trend > 0, ASY_INCR, np.where(trend < 0, ASY_DECR, 1.0))
    low = x - gamma * (x_old1 - low)
    upp = x + gamma * (upp - x_old1)
    low = np.clip(low, x - ASY_MAX * rng, x - ASY_MIN * rng)
    upp = np.clip(upp, x + ASY_MIN * rng, x + ASY_MAX * rng)
    return low, upp


def move_limits(x, low, upp, x_min, x_max):
    rng = x_max - x_min
    alpha = np.maximum.reduce([x_min, low + ALBEFA * (x - low), x - MOVE * rng])
    beta = np.minimum.reduce([x_max, upp - ALBEFA * (upp - x), x + MOVE * rng])
    return alpha, beta


# --------------------------------------------------------------------------
# subproblem


@dataclass
class SubproblemResult:
    x: np.ndarray
    y: np.ndarray
    z: float
    lam: np.ndarray
    xsi: np.ndarray
    eta: np.ndarray
    kkt_residual: float
    iterations: int


def _primal_from_dual(approx: Approximation, lam, alpha, beta):
    """Minimizer over ``[alpha, beta]`` of the Lagrangian for fixed ``lam``.

    Each coordinate minimizes ``P/(U - x) + Q/(x - L)``, whose stationary
    point is ``(sqrt(P) L + sqrt(Q) U) / (sqrt(P) + sqrt(Q))``.
    """
    P = approx.p[0] + lam @ approx.p[1:]
    Q = approx.q[0] + lam @ approx.q[1:]
    sp, sq = np.sqrt(P), np.sqrt(Q)
    x = (sp * approx.low + sq * approx.upp) / (sp + sq)
    return np.clip(x, alpha, beta), P, Q


def solve_subproblem(approx: Approximation, a_0: float, c, alpha, beta,
                     epsimin: float = 1e-10, max_iter: int = 200,
                     lam0=None, epsi0: float = 1.0) -> SubproblemResult:
    """Interior point on the separable dual of the MMA subproblem.

    With ``d = 0`` and ``a = 0`` in the outer formulation, ``z = 0`` and the
    dual reduces to maximizing a concave ``W(lam)`` over ``0 <= lam <= c``.
    The primal point ``x(lam)`` is explicit, so the only linear system is
    ``m x m``. Each barrier level maximizes
    ``W + epsi * sum(log(lam) + log(c - lam))`` by generalized Newton steps;
    the dual bound multipliers ``s = epsi / lam`` (primal slack) and
    ``y = epsi / (c - lam)`` (artificial variables) stay on the central path.
    ``W`` is only once differentiable where a coordinate meets its move
    limit, so steps are safeguarded by a line search on the directional
    derivative, which is monotone along any line because the barrier
    function is concave.

    Raises
    ------
    SubproblemError
        If ``max_iter`` Newton steps do not reach the final barrier level.
    """
    if not a_0 > 0:
        raise ValueError("a_0 must be positive")
    low, upp = approx.low, approx.upp
    Pc, Qc = approx.p[1:], approx.q[1:]
    b = -approx.r[1:]
    m = Pc.shape[0]
    c = np.broadcast_to(np.asarray(c, dtype=float), (m,)).copy()
    if np.any(c <= 0):
        raise ValueError("penalty weights c must be positive")

    def dual_grad(lam):
        x, P, Q = _primal_from_dual(approx, lam, alpha, beta)
        ux, xl = upp - x, x - low
        g = Pc @ (1.0 / ux) + Qc @ (1.0 / xl)
        return x, P, Q, ux, xl, g - b

    def floor(x, ux, xl):
        # round-off in x(lam) propagated into the constraint values; the
        # complementarity rows get the machine floor of their products
        dgx = np.abs(Pc / ux ** 2 - Qc / xl ** 2) @ np.spacing(np.abs(x))
        mag = Pc @ (1.0 / ux) + Qc @ (1.0 / xl) + np.abs(b)
        return np.concatenate([4.0 * dgx + 8.0 * np.spacing(mag), np.full(2 * m, 1e-300)])

    # c - lam is carried as t so that a penalty-active constraint keeps
    # full precision in its complementarity product
    if lam0 is None:
        lam = np.minimum(1.0, 0.5 * c)
        t = c - lam
        s = np.ones(m)
        y = np.ones(m)
        epsi = 1.0
    else:
        # warm start: previous multipliers pulled off the bounds
        epsi = float(epsi0)
        lam = np.clip(np.asarray(lam0, dtype=float), 1e-3 * epsi, c - 1e-3 * epsi)
        t = c - lam
        s = epsi / lam
        y = epsi / t
    total = 0
    x, P, Q, ux, xl, grad = dual_grad(lam)
    while True:
        def residual(grad, lam, t, s, y):
            return np.concatenate([grad + s - y, lam * s - epsi, t * y - epsi])

        def unfinished(r):
            if np.max(np.abs(r)) <= 0.9 * epsi:
                return False
            if epsi > 1e-7:
                return True
            return bool(np.max(np.abs(r) / np.maximum(0.9 * epsi, floor(x, ux, xl))) > 1.0)

        r = residual(grad, lam, t, s, y)
        while unfinished(r):
            if total >= max_iter:
                raise SubproblemError(
                    f"interior point exceeded {max_iter} iterations at barrier {epsi:.1e}, "
                    f"residual {np.max(np.abs(r)):.3e}")
            total += 1
            inside = (x > alpha) & (x < beta)
            dg = (Pc / ux ** 2 - Qc / xl ** 2)[:, inside]
            curv = 2.0 * (P / ux ** 3 + Q / xl ** 3)[inside]
            K = -(dg / curv) @ dg.T - np.diag(s / lam + y / t)
            # the right-hand side collapses to minus the barrier gradient
            bgrad = grad + epsi / lam - epsi / t
            dlam = np.linalg.solve(K, -bgrad)
            ds = (epsi - lam * s - s * dlam) / lam
            dy = (epsi - t * y + y * dlam) / t
            slope0 = bgrad @ dlam

            vars_ = np.concatenate([lam, t, s, y])
            dvars = np.concatenate([dlam, -dlam, ds, dy])
            tau_max = min(1.0, 0.99 / max(float(np.max(-dvars / vars_)), 1e-300))

            def probe(tau):
                lam_c, t_c = lam + tau * dlam, t - tau * dlam
                out = dual_grad(lam_c)
                return lam_c, t_c, out, (out[-1] + epsi / lam_c - epsi / t_c) @ dlam

            tau = tau_max
            cand = probe(tau)
            if cand[3] < 0:
                # concave barrier: the directional derivative decreases along
                # the ray, so bisect for a point that still ascends
                lo_tau, hi_tau = 0.0, tau
                for _ in range(60):
                    tau = 0.5 * (lo_tau + hi_tau)
                    cand = probe(tau)
                    if cand[3] < 0:
                        hi_tau = tau
                    elif cand[3] <= 0.5 * slope0:
                        break
                    else:
                        lo_tau = tau
            lam, t, (x, P, Q, ux, xl, grad), _ = cand
            s = s + tau * ds
            y = y + tau * dy
            r = residual(grad, lam, t, s, y)
            if np.all(np.abs(tau * dlam) <= 4.0 * np.spacing(np.minimum(lam, t))):
                break       # stalled at working precision
        if epsi <= epsimin * (1.0 + 1e-9):
            break
        epsi = max(0.1 * epsi, epsimin)

    x, P, Q, ux, xl, grad = dual_grad(lam)
    # box multipliers from the Lagrangian slope at the returned point
    slope = P / ux ** 2 - Q / xl ** 2
    xsi = np.where(x <= alpha, np.maximum(slope, 0.0), 0.0)
    eta = np.where(x >= beta, np.maximum(-slope, 0.0), 0.0)
    kkt = subproblem_kkt_residual(approx, a_0, c, alpha, beta, x, y, 0.0, lam, xsi, eta, t)
    if not np.isfinite(kkt):
        raise SubproblemError("interior-point iterate became non-finite")
    return SubproblemResult(x, y, 0.0, lam, xsi, eta, kkt, total)


def subproblem_kkt_residual(approx: Approximation, a_0, c, alpha, beta,
                            x, y, z, lam, xsi, eta, c_minus_lam=None) -> float:
    """Max-abs KKT residual of the MMA subproblem at a primal-dual point.

    Stationarity in ``x``, feasibility of the approximated constraints and
    the box, complementarity products, and sign violations of the
    multipliers. Rows whose value is a difference of large terms
    (stationarity and the constraint values) are divided by
    ``max(1, sum of |terms|)`` so the residual is not dominated by round-off.
    ``c_minus_lam`` (the multiplier of ``y >= 0``) may be supplied when the
    caller tracked it more accurately than the subtraction gives.
    """
    low, upp = approx.low, approx.upp
    ux, xl = upp - x, x - low
    P = approx.p[0] + lam @ approx.p[1:]
    Q = approx.q[0] + lam @ approx.q[1:]
    b = -approx.r[1:]
    pos = approx.p[1:] @ (1.0 / ux) + approx.q[1:] @ (1.0 / xl)
    g = pos - b
    g_scale = np.maximum(1.0, pos + np.abs(b) + np.abs(y))
    slack = (y - g) / g_scale
    st_scale = np.maximum(1.0, P / ux ** 2 + Q / xl ** 2 + np.abs(xsi) + np.abs(eta))
    mu_y = c - lam if c_minus_lam is None else c_minus_lam
    parts = [
        (P / ux ** 2 - Q / xl ** 2 - xsi + eta) / st_scale,
        np.minimum(slack, 0.0), lam * slack,
        mu_y * y, [a_0 * z],
        np.minimum(x - alpha, 0.0), np.minimum(beta - x, 0.0),
        xsi * (x - alpha), eta * (beta - x),
        np.minimum(lam, 0.0), np.minimum(mu_y, 0.0), np.minimum(y, 0.0),
        [min(z, 0.0)], np.minimum(xsi, 0.0), np.minimum(eta, 0.0),
    ]
    return float(max(np.max(np.abs(np.asarray(p_, dtype=float))) for p_ in parts))


# --------------------------------------------------------------------------
# driver


@dataclass
class MmaState:
    k: int
    x: np.ndarray
    x_old1: np.ndarray
    x_old2: np.ndarray
    low: np.ndarray
    upp: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    rho: np.ndarray
    v: float
    epsilon_tol: float


@dataclass
class TraceRecord:
    k: int
    f: list
    z: float
    y: list
    rho: list
    inner_count: int
    v: float
    merit: float
    kkt_sub: float
    conservative: bool

    def as_dict(self) -> dict:
        out = {"k": self.k}
        out.update({f"f_{i}": float(v) for i, v in enumerate(self.f)})
        out["z"] = self.z
        out.update({f"y_{i + 1}": float(v) for i, v in enumerate(self.y)})
        out.update({f"rho_{i}": float(v) for i, v in enumerate(self.rho)})
        out.update(inner_count=self.inner_count, v=self.v, merit=self.merit,
                   kkt_sub=self.kkt_sub, conservative=self.conservative)
        return out


@dataclass
class OptimizeResult:
    x: np.ndarray
    f: np.ndarray
    merit: float
    converged: bool
    feasible: bool
    n_outer: int
    trace: list = field(default_factory=list)


def _solve_warm(approx, a_0, c, alpha, beta, epsimin, lam_prev, warm_epsi):
    if lam_prev is not None and warm_epsi is not None:
        try:
            return solve_subproblem(approx, a_0, c, alpha, beta, epsimin=epsimin,
                                    lam0=lam_prev, epsi0=warm_epsi)
        except SubproblemError:
            log.debug("warm-started subproblem failed, retrying cold")
    return solve_subproblem(approx, a_0, c, alpha, beta, epsimin=epsimin)


def optimize(problem, x0, epsilon_tol: float = 1e-5, max_outer: int = 500,
             max_inner: int = 50, gap: str = "absolute",
             conservative_tol: float = 1e-12, feas_tol: float = 1e-6,
             epsimin: float = 1e-10, warm_epsi: float | None = 1e-6) -> OptimizeResult:
    """Run GCMMA from ``x0``.

    Coordinates with ``x_min == x_max`` are held fixed. The outer loop stops
    once the change ``v`` of the transformed objective between consecutive
    outer iterations is at most ``epsilon_tol`` (absolute, or relative to
    ``max(1, |merit|)`` with ``gap="relative"``).
    """
    x_min_full = np.asarray(problem.x_min, dtype=float)
    x_max_full = np.asarray(problem.x_max, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if np.any(x0 < x_min_full) or np.any(x0 > x_max_full):
        raise ValueError("starting point outside the box")
    free = x_max_full > x_min_full
    x_full = x0.copy()
    x_min, x_max = x_min_full[free], x_max_full[free]
    x_range = x_max - x_min

    def full(xf):
        out = x_full.copy()
        out[free] = xf
        return out

    def fg(xf):
        f, G = problem.evaluate(full(xf), True)
        return np.asarray(f, dtype=float), np.asarray(G, dtype=float)[:, free]

    def fval(xf):
        return np.asarray(problem.evaluate(full(xf), False)[0], dtype=float)

    merit = problem.transformed_objective
    c = np.asarray(problem.c, dtype=float)

    x = x0[free].copy()
    f, G = fg(x)
    F = merit(f)
    state = MmaState(0, x, x.copy(), x.copy(), x - ASY_INIT * x_range, x + ASY_INIT * x_range,
                     x_min.copy(), x_max.copy(), rho_init(G, x_range), np.inf, epsilon_tol)
    trace = []
    converged = False
    lam_prev = None

    while state.k < max_outer:
        k = state.k
        low, upp = update_asymptotes(k, state.x, state.x_old1, state.x_old2,
                                     state.low, state.upp, x_min, x_max)
        alpha, beta = move_limits(state.x, low, upp, x_min, x_max)
        rho = rho_init(G, x_range)
        inner = 0
        while True:
            approx = build_approximation(f, G, state.x, low, upp, rho, x_min, x_max)
            sub = _solve_warm(approx, problem.a_0, c, alpha, beta, epsimin, lam_prev, warm_epsi)
            lam_prev = sub.lam
            f_t = fval(sub.x)
            g_t = approx.value(sub.x)
            bad = conservative_check(f_t, g_t, conservative_tol)
            if not bad.any() or inner >= max_inner:
                break
            dist = gcmma_distance(sub.x, state.x, low, upp, x_min, x_max)
            if dist <= 0:
                break
            rho = np.where(bad, rho_update(rho, f_t, g_t, dist), rho)
            inner += 1
        conservative = not bad.any()
        if not conservative:
            log.warning("inner loop hit its cap at outer iteration %d", k)

        F_t = merit(f_t)
        if F_t <= F:
            x_new = sub.x
            f_new, G_new = fg(x_new)
            v = F - F_t
        else:
            # round-off level increase: keep the current point
            x_new, f_new, G_new, F_t, v = state.x, f, G, F, 0.0
        scale = max(1.0, abs(F)) if gap == "relative" else 1.0
        trace.append(TraceRecord(k, f_new.tolist(), float(sub.z),
                                 np.maximum(f_new[1:], 0.0).tolist(), rho.tolist(),
                                 inner, float(v), float(F_t), sub.kkt_residual, conservative))
        state = MmaState(k + 1, x_new, state.x, state.x_old1, low, upp, alpha, beta,
                         rho, float(v), epsilon_tol)
        f, G, F = f_new, G_new, F_t
        if v <= epsilon_tol * scale:
            converged = True
            break

    feasible = bool(np.all(f[1:] <= feas_tol))
    return OptimizeResult(full(state.x), f, F, converged, feasible, state.k, trace)
