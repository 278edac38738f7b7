"""The covert-rate maximization as four smooth scalar functions of the real
design vector, with analytic gradients.

    f_0 = -R_bb                          (objective, minimized)
    f_1 = ||w_b||^2 + ||w_c||^2 - P_max  (power budget)
    f_2 = 1 - P_lb - epsilon             (covertness, via the closed-form bound)
    f_3 = R_star - R_cc                  (Carol's QoS)

Every |.|^2 term is a form ``|theta^T K w|^2``; its partial derivatives with
respect to amplitudes, phases and the energy split follow from
``d|s|^2 = 2 Re(conj(s) ds)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import qos
from .model import (Beamformers, ChannelRealization, DesignLayout, StarRisProfile,
                    SystemParams, unpack)

LN2 = math.log(2.0)
BETA_FLOOR = 1e-6
DEFAULT_PENALTY = 1e4


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    params: SystemParams
    channels: ChannelRealization
    sigma_star_val: float
    x_min: np.ndarray
    x_max: np.ndarray
    a_0: float = 1.0
    c: np.ndarray = field(default_factory=lambda: np.full(3, DEFAULT_PENALTY))
    layout: DesignLayout = field(init=False, repr=False)
    B: np.ndarray = field(init=False, repr=False)
    C: np.ndarray = field(init=False, repr=False)
    v_jam: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        ch = self.channels
        if (ch.N, ch.M) != (self.params.N, self.params.M):
            raise ValueError("channel dimensions do not match params")
        if self.a_0 <= 0:
            raise ValueError("a_0 must be positive")
        object.__setattr__(self, "layout", DesignLayout(self.params.M, self.params.N))
        object.__setattr__(self, "B", np.conj(ch.h_rb)[:, None] * ch.H_AR)
        object.__setattr__(self, "C", np.conj(ch.h_rc)[:, None] * ch.H_AR)
        object.__setattr__(self, "v_jam", np.conj(ch.h_rb) * np.conj(ch.h_rc))
        object.__setattr__(self, "c", np.asarray(self.c, dtype=float))

    @property
    def n(self) -> int:
        return self.layout.size

    def decode(self, x) -> tuple[Beamformers, StarRisProfile]:
        return unpack(x, self.params.M, self.params.N)

    def random_start(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.x_min, self.x_max)

    def evaluate(self, x, want_grad: bool = True):
        return _evaluate(self, x, want_grad)

    def transformed_objective(self, f) -> float:
        """``f_0 + a_0 z + c.y`` at the optimal ``y = max(f_i, 0)``, ``z = 0``."""
        f = np.asarray(f)
        return float(f[0] + self.c @ np.maximum(f[1:], 0.0))


def make_instance(params: SystemParams, channels: ChannelRealization,
                  beta_floor: float = BETA_FLOOR, **kw) -> ProblemInstance:
    layout = DesignLayout(params.M, params.N)
    x_min, x_max = layout.bounds(params.P_max, beta_floor)
    sig = qos.sigma_star(params.kappa, params)
    return ProblemInstance(params, channels, sig, x_min, x_max, **kw)


def baseline_ris_instance(instance: ProblemInstance, reflect_ratio: float = 0.5) -> ProblemInstance:
    """Two conventional RISs side by side: reflect-only then transmit-only.

    The first ``reflect_ratio * N`` elements are pinned to full reflection,
    the rest to full transmission (the edges of the STAR box, so every
    baseline point is also a STAR point). Phases stay free.
    """
    N = instance.params.N
    n_r = reflect_ratio * N
    if abs(n_r - round(n_r)) > 1e-9:
        raise ValueError(f"N={N} cannot be split with ratio {reflect_ratio}")
    n_r = int(round(n_r))
    sl = instance.layout.slices["beta_r"]
    lo = instance.x_min.copy()
    hi = instance.x_max.copy()
    beta_lo, beta_hi = lo[sl].copy(), hi[sl].copy()
    pinned = np.where(np.arange(N) < n_r, beta_hi, beta_lo)
    lo[sl] = pinned
    hi[sl] = pinned
    return replace(instance, x_min=lo, x_max=hi)


# --------------------------------------------------------------------------
# evaluation


def _split(instance: ProblemInstance, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (instance.n,):
        raise ValueError(f"design vector must have length {instance.n}")
    s = instance.layout.slices
    return (x[s["omega_b"]], x[s["omega_c"]], x[s["phase_b"]], x[s["phase_c"]],
            x[s["beta_r"]], x[s["phi_r"]], x[s["phi_t"]])


def _covert_terms(instance: ProblemInstance, om_b, om_c, beta):
    p = instance.params
    ch = instance.channels
    vb = float(om_b @ om_b)
    vc = float(om_c @ om_c)
    v = vb + vc
    theta = float(np.sum(beta))
    hrc2 = np.abs(ch.h_rc) ** 2
    T = float(np.sum((1.0 - beta) * hrc2))
    if v > 0 and theta > 0:
        u = p.P_j_max * T / (ch.l_AR * theta * v)
    else:
        u = math.inf
    return vb, vc, v, theta, T, hrc2, u


def _log1p_ratio(u):
    if math.isinf(u):
        return 0.0, 0.0
    if u < 1e-4:
        return 1.0 - u / 2 + u * u / 3, -0.5 + 2 * u / 3 - 0.75 * u * u
    L = math.log1p(u) / u
    return L, (1.0 / (1.0 + u) - L) / u


def eval_f(instance: ProblemInstance, x) -> np.ndarray:
    """``[f_0, f_1, f_2, f_3]`` at ``x``."""
    return _evaluate(instance, x, want_grad=False)[0]


def grad_f(instance: ProblemInstance, x) -> np.ndarray:
    """Analytic gradients, shape ``(4, n)``."""
    return _evaluate(instance, x, want_grad=True)[1]


def eval_and_grad(instance: ProblemInstance, x):
    return _evaluate(instance, x, want_grad=True)


def _evaluate(instance: ProblemInstance, x, want_grad: bool):
    p = instance.params
    om_b, om_c, ph_b, ph_c, beta, ph_r, ph_t = _split(instance, x)
    e_b, e_c = np.exp(1j * ph_b), np.exp(1j * ph_c)
    w_b, w_c = om_b * e_b, om_c * e_c
    e_r, e_t = np.exp(1j * ph_r), np.exp(1j * ph_t)
    sq_r, sq_t = np.sqrt(beta), np.sqrt(1.0 - beta)
    th_r, th_t = sq_r * e_r, sq_t * e_t

    row_b = th_r @ instance.B          # h_rb^H Theta_r H_AR
    row_c = th_t @ instance.C          # h_rc^H Theta_t H_AR
    s_bb, s_bc = row_b @ w_b, row_b @ w_c
    s_cc, s_cb = row_c @ w_c, row_c @ w_b
    s_bj = th_t @ instance.v_jam
    g_bb, g_bc, g_bj = abs(s_bb) ** 2, abs(s_bc) ** 2, abs(s_bj) ** 2
    g_cc, g_cb = abs(s_cc) ** 2, abs(s_cb) ** 2

    jam_b = p.P_j_max * (1.0 - p.iota)
    I_b = g_bc + jam_b * g_bj + p.sigma2_b
    I_c = g_cb + instance.sigma_star_val + p.sigma2_c
    R_bb = math.log2(1.0 + g_bb / I_b)
    R_cc = math.log2(1.0 + g_cc / I_c)

    vb, vc, v, theta, T, hrc2, u = _covert_terms(instance, om_b, om_c, beta)
    q = vb / v if v > 0 else 0.0
    L, dL = _log1p_ratio(u)

    f = np.array([-R_bb, vb + vc - p.P_max, q * L - p.epsilon, p.R_star - R_cc])
    if not want_grad:
        return f, None

    s = instance.layout.slices
    G = np.zeros((4, instance.n))
    Bw_b, Bw_c = instance.B @ w_b, instance.B @ w_c
    Cw_b, Cw_c = instance.C @ w_b, instance.C @ w_c
    with np.errstate(divide="ignore", invalid="ignore"):
        dth_r = np.where(beta > 0, e_r / (2.0 * sq_r), 0.0)
        dth_t = np.where(beta < 1, -e_t / (2.0 * sq_t), 0.0)

    def form(sv, row, w_e, w, Kw, th, dth):
        cs = np.conj(sv)
        return (2.0 * np.real(cs * row * w_e),          # d/d omega
                -2.0 * np.imag(cs * row * w),           # d/d phase (beamformer)
                2.0 * np.real(cs * Kw * dth),           # d/d beta
                -2.0 * np.imag(cs * Kw * th))           # d/d phase (RIS)

    # each entry: (d omega, d phase, d beta, d ris-phase)
    d_bb = form(s_bb, row_b, e_b, w_b, Bw_b, th_r, dth_r)
    d_bc = form(s_bc, row_b, e_c, w_c, Bw_c, th_r, dth_r)
    d_cc = form(s_cc, row_c, e_c, w_c, Cw_c, th_t, dth_t)
    d_cb = form(s_cb, row_c, e_b, w_b, Cw_b, th_t, dth_t)
    cs_bj = np.conj(s_bj)
    dbj_beta = 2.0 * np.real(cs_bj * instance.v_jam * dth_t)
    dbj_phi_t = -2.0 * np.imag(cs_bj * instance.v_jam * th_t)

    # f_0 = -log2(1 + S/I): dR = (I dS - S dI) / (ln2 I (I + S))
    k0 = 1.0 / (LN2 * I_b * (I_b + g_bb))
    aS, aI = -k0 * I_b, k0 * g_bb            # df0 = aS dS + aI dI
    G[0, s["omega_b"]] = aS * d_bb[0]
    G[0, s["phase_b"]] = aS * d_bb[1]
    G[0, s["omega_c"]] = aI * d_bc[0]
    G[0, s["phase_c"]] = aI * d_bc[1]
    G[0, s["beta_r"]] = aS * d_bb[2] + aI * (d_bc[2] + jam_b * dbj_beta)
    G[0, s["phi_r"]] = aS * d_bb[3] + aI * d_bc[3]
    G[0, s["phi_t"]] = aI * jam_b * dbj_phi_t

    G[1, s["omega_b"]] = 2.0 * om_b
    G[1, s["omega_c"]] = 2.0 * om_c

    if v > 0 and not math.isinf(u):
        dq_b = 2.0 * om_b * vc / v ** 2
        dq_c = -2.0 * om_c * vb / v ** 2
        du_b = -u * 2.0 * om_b / v
        du_c = -u * 2.0 * om_c / v
        du_beta = u * (-hrc2 / T - 1.0 / theta) if T > 0 else -u / theta * np.ones_like(beta)
        G[2, s["omega_b"]] = dq_b * L + q * dL * du_b
        G[2, s["omega_c"]] = dq_c * L + q * dL * du_c
        G[2, s["beta_r"]] = q * dL * du_beta

    k3 = 1.0 / (LN2 * I_c * (I_c + g_cc))
    cS, cI = -k3 * I_c, k3 * g_cc            # df3 = cS dS + cI dI
    G[3, s["omega_c"]] = cS * d_cc[0]
    G[3, s["phase_c"]] = cS * d_cc[1]
    G[3, s["omega_b"]] = cI * d_cb[0]
    G[3, s["phase_b"]] = cI * d_cb[1]
    G[3, s["beta_r"]] = cS * d_cc[2] + cI * d_cb[2]
    G[3, s["phi_t"]] = cS * d_cc[3] + cI * d_cb[3]
    return f, G


def covert_rate(instance: ProblemInstance, x) -> float:
    return -float(eval_f(instance, x)[0])


def is_feasible(f, tol: float = 1e-6) -> bool:
    return bool(np.all(np.asarray(f)[1:] <= tol))
