"""System model: parameters, Rayleigh channels, STAR-RIS profile and the
real design-vector parameterization used by the optimizer.

Everything is stored in linear units (watts, linear gains). Conversion from
dB/dBm/dBW happens in :mod:`starcovert.config`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def dbw_to_watt(dbw):
    return db_to_linear(dbw)


def path_loss(d, alpha, rho_0):
    """Large-scale gain ``rho_0 / d**alpha``.

    Parameters
    ----------
    d : float or array_like
        Link distance in meters, strictly positive.
    alpha : float
        Path-loss exponent.
    rho_0 : float
        Reference gain at 1 m (linear).
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError(f"distance must be positive, got {d}")
    out = rho_0 / d ** alpha
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SystemParams:
    """Scalar constants of the covert link (linear units throughout)."""

    M: int = 3
    N: int = 30
    rho_0: float = 0.01
    alpha: float = 2.6
    d_AR: float = 50.0
    d_rb: float = 20.0
    d_rc: float = 25.0
    d_rw: float = 15.0
    sigma2_b: float = 1e-13
    sigma2_c: float = 1e-13
    sigma2_w: float = 1e-13
    phi_sic: float = 1e-11
    P_max: float = 1.0
    P_j_max: float = 1.0
    epsilon: float = 0.1
    iota: float = 0.1
    kappa: float = 0.1
    R_star: float = 4.0

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        positive = ("rho_0", "d_AR", "d_rb", "d_rc", "d_rw", "sigma2_b",
                    "sigma2_c", "sigma2_w", "P_max", "P_j_max")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        for name in ("epsilon", "iota", "kappa"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if not 0.0 <= self.phi_sic <= 1.0:
            raise ValueError("phi_sic must lie in [0, 1]")
        if self.R_star < 0:
            raise ValueError("R_star must be nonnegative")

    @property
    def n_design(self) -> int:
        return 4 * self.M + 3 * self.N

    @property
    def l_AR(self) -> float:
        return path_loss(self.d_AR, self.alpha, self.rho_0)

    @property
    def l_rb(self) -> float:
        return path_loss(self.d_rb, self.alpha, self.rho_0)

    @property
    def l_rc(self) -> float:
        return path_loss(self.d_rc, self.alpha, self.rho_0)

    @property
    def l_rw(self) -> float:
        return path_loss(self.d_rw, self.alpha, self.rho_0)

    def replace(self, **changes) -> "SystemParams":
        from dataclasses import replace
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One draw of all channels. Stored channels include the large-scale gain."""

    H_AR: np.ndarray
    h_rb: np.ndarray
    h_rc: np.ndarray
    h_rw: np.ndarray
    h_cc: complex
    l_AR: float
    l_rb: float
    l_rc: float
    l_rw: float

    @property
    def N(self) -> int:
        return self.H_AR.shape[0]

    @property
    def M(self) -> int:
        return self.H_AR.shape[1]

    def truncate(self, n: int) -> "ChannelRealization":
        """First ``n`` RIS elements; nested realizations for N sweeps."""
        if not 1 <= n <= self.N:
            raise ValueError(f"cannot truncate {self.N} elements to {n}")
        return ChannelRealization(
            H_AR=self.H_AR[:n], h_rb=self.h_rb[:n], h_rc=self.h_rc[:n],
            h_rw=self.h_rw[:n], h_cc=self.h_cc, l_AR=self.l_AR,
            l_rb=self.l_rb, l_rc=self.l_rc, l_rw=self.l_rw)


def crandn(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit-variance circularly-symmetric complex Gaussian samples."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)


def sample_channels(params: SystemParams, seed) -> ChannelRealization:
    """Draw a Rayleigh realization; each block gets its own RNG substream."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    g_ar, g_rb, g_rc, g_rw, g_cc = (np.random.default_rng(s) for s in ss.spawn(5))
    N, M = params.N, params.M
    l_AR, l_rb, l_rc, l_rw = params.l_AR, params.l_rb, params.l_rc, params.l_rw
    h_cc = complex(np.sqrt(params.phi_sic) * crandn(g_cc, ()))
    return ChannelRealization(
        H_AR=np.sqrt(l_AR) * crandn(g_ar, (N, M)),
        h_rb=np.sqrt(l_rb) * crandn(g_rb, N),
        h_rc=np.sqrt(l_rc) * crandn(g_rc, N),
        h_rw=np.sqrt(l_rw) * crandn(g_rw, N),
        h_cc=h_cc, l_AR=l_AR, l_rb=l_rb, l_rc=l_rc, l_rw=l_rw)


@dataclass(frozen=True, eq=False)
class StarRisProfile:
    """Per-element energy split and phases of the STAR-RIS.

    The transmission fraction is ``1 - beta_r`` element-wise.
    """

    beta_r: np.ndarray
    phi_r: np.ndarray
    phi_t: np.ndarray

    @property
    def beta_t(self) -> np.ndarray:
        return 1.0 - self.beta_r

    @property
    def theta_r(self) -> np.ndarray:
        """Diagonal of the reflection matrix."""
        return np.sqrt(self.beta_r) * np.exp(1j * self.phi_r)

    @property
    def theta_t(self) -> np.ndarray:
        """Diagonal of the transmission matrix."""
        return np.sqrt(self.beta_t) * np.exp(1j * self.phi_t)

    @property
    def Theta_r(self) -> np.ndarray:
        return np.diag(self.theta_r)

    @property
    def Theta_t(self) -> np.ndarray:
        return np.diag(self.theta_t)


@dataclass(frozen=True, eq=False)
class Beamformers:
    """Precoders ``w = omega * exp(1j * phase)`` for Bob and Carol."""

    omega_b: np.ndarray
    omega_c: np.ndarray
    phase_b: np.ndarray
    phase_c: np.ndarray

    @property
    def w_b(self) -> np.ndarray:
        return self.omega_b * np.exp(1j * self.phase_b)

    @property
    def w_c(self) -> np.ndarray:
        return self.omega_c * np.exp(1j * self.phase_c)

    @property
    def power(self) -> float:
        return float(np.sum(self.omega_b ** 2) + np.sum(self.omega_c ** 2))

    @classmethod
    def from_complex(cls, w_b, w_c) -> "Beamformers":
        w_b = np.asarray(w_b, dtype=complex)
        w_c = np.asarray(w_c, dtype=complex)
        return cls(np.abs(w_b), np.abs(w_c),
                   np.mod(np.angle(w_b), TWO_PI), np.mod(np.angle(w_c), TWO_PI))


@dataclass(frozen=True)
class DesignLayout:
    """Index map of ``x = [omega_b, omega_c, phase_b, phase_c, beta_r, phi_r, phi_t]``."""

    M: int
    N: int
    slices: dict = field(init=False, repr=False)

    def __post_init__(self):
        M, N = self.M, self.N
        sizes = [("omega_b", M), ("omega_c", M), ("phase_b", M), ("phase_c", M),
                 ("beta_r", N), ("phi_r", N), ("phi_t", N)]
        out, start = {}, 0
        for name, size in sizes:
            out[name] = slice(start, start + size)
            start += size
        object.__setattr__(self, "slices", out)

    @property
    def size(self) -> int:
        return 4 * self.M + 3 * self.N

    @property
    def phase_mask(self) -> np.ndarray:
        mask = np.zeros(self.size, dtype=bool)
        for name in ("phase_b", "phase_c", "phi_r", "phi_t"):
            mask[self.slices[name]] = True
        return mask

    def bounds(self, P_max: float, beta_floor: float = 0.0):
        """Box ``(x_min, x_max)``: amplitudes, energy split, phases."""
        lo = np.zeros(self.size)
        hi = np.full(self.size, TWO_PI)
        amp = np.sqrt(P_max)
        for name in ("omega_b", "omega_c"):
            hi[self.slices[name]] = amp
        lo[self.slices["beta_r"]] = beta_floor
        hi[self.slices["beta_r"]] = 1.0 - beta_floor
        return lo, hi


@dataclass(frozen=True, eq=False)
class DesignVector:
    x: np.ndarray
    x_min: np.ndarray
    x_max: np.ndarray


def pack(beamformers: Beamformers, profile: StarRisProfile,
         P_max: float = np.inf) -> DesignVector:
    """Flatten beamformers and RIS profile into the optimizer's vector.

    Phases are reduced modulo 2*pi. The attached box has amplitude ceiling
    ``sqrt(P_max)``.
    """
    M = np.size(beamformers.omega_b)
    N = np.size(profile.beta_r)
    layout = DesignLayout(M, N)
    x = np.concatenate([
        beamformers.omega_b, beamformers.omega_c,
        np.mod(beamformers.phase_b, TWO_PI), np.mod(beamformers.phase_c, TWO_PI),
        profile.beta_r,
        np.mod(profile.phi_r, TWO_PI), np.mod(profile.phi_t, TWO_PI),
    ]).astype(float)
    x_min, x_max = layout.bounds(P_max)
    return DesignVector(x, x_min, x_max)


def unpack(x, M: int, N: int, x_min=None, x_max=None):
    """Inverse of :func:`pack`. Nothing is clamped.

    Raises
    ------
    ValueError
        On a length mismatch or an entry outside ``[x_min, x_max]``.
    """
    if isinstance(x, DesignVector):
        x_min = x.x_min if x_min is None else x_min
        x_max = x.x_max if x_max is None else x_max
        x = x.x
    x = np.asarray(x, dtype=float)
    layout = DesignLayout(M, N)
    if x.shape != (layout.size,):
        raise ValueError(f"design vector must have length {layout.size}, got {x.shape}")
    if x_min is None or x_max is None:
        # natural box without an amplitude ceiling
        lo, hi = layout.bounds(np.inf)
        x_min = lo if x_min is None else x_min
        x_max = hi if x_max is None else x_max
    bad = (x < x_min) | (x > x_max) | ~np.isfinite(x)
    if np.any(bad):
        idx = np.flatnonzero(bad)
        raise ValueError(f"design vector outside its box at indices {idx[:10].tolist()}")
    s = layout.slices
    bf = Beamformers(x[s["omega_b"]].copy(), x[s["omega_c"]].copy(),
                     x[s["phase_b"]].copy(), x[s["phase_c"]].copy())
    prof = StarRisProfile(x[s["beta_r"]].copy(), x[s["phi_r"]].copy(), x[s["phi_t"]].copy())
    return bf, prof
