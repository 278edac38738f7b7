"""YAML experiment configuration.

Physical quantities are written in the units they are usually quoted in and
converted once, here:

    rho_0_db, phi_sic_db           dB      -> linear
    sigma2_{b,c,w}_dbm             dBm     -> W
    P_max_dbw, P_j_max_dbw         dBW     -> W
    d_AR, d_rb, d_rc, d_rw         meters

Unknown keys and bad values are collected and reported together in one
:class:`ConfigError`.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .model import SystemParams, db_to_linear, dbm_to_watt, dbw_to_watt

SWEEP_VARS = ("epsilon", "N", "M", "P_max_dbw")
SCHEMES = ("star", "ris")

DEFAULTS = {
    "seed": 2024,
    "system": {
        "M": 3, "N": 30,
        "rho_0_db": -20.0, "alpha": 2.6,
        "d_AR": 50.0, "d_rb": 20.0, "d_rc": 25.0, "d_rw": 15.0,
        "sigma2_b_dbm": -100.0, "sigma2_c_dbm": -100.0, "sigma2_w_dbm": -100.0,
        "phi_sic_db": -110.0,
        "P_max_dbw": 0.0, "P_j_max_dbw": 0.0,
        "epsilon": 0.1, "iota": 0.1, "kappa": 0.1, "R_star": 4.0,
    },
    "solver": {
        "epsilon_tol": 1e-5, "max_outer": 500, "max_inner": 50,
        "gap": "absolute", "feas_tol": 1e-6, "beta_floor": 1e-6,
        "penalty": 1e4,
    },
    "sweep": {
        "seeds": 20,
        "starts": 5,
        "schemes": ["star", "ris"],
        "reflect_ratio": 0.5,
        "warm_chain": False,
        "random_when_warm": True,
        "record_timing": False,
        "axes": [
            {"name": "eps_p0", "var": "epsilon",
             "values": [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4],
             "fixed": {"P_max_dbw": 0.0}},
            {"name": "eps_p3", "var": "epsilon",
             "values": [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4],
             "fixed": {"P_max_dbw": 3.0}, "warm_from": "eps_p0"},
            {"name": "elements", "var": "N",
             "values": [10, 20, 30, 40, 50], "fixed": {"P_max_dbw": 3.0}},
        ],
    },
    "validate": {
        "dep_configs": 30, "dep_taus": 20, "dep_samples": 1_000_000, "dep_tol": 0.01,
        "outage_configs": 30, "outage_samples": 1_000_000, "outage_tol": 0.005,
        "grid_configs": 100, "grid_points": 100_000,
        "fd_points": 20, "fd_h_rel": 1e-6, "fd_tol": 1e-5,
        "avg_configs": 5, "avg_samples": 1_000_000, "avg_tol": 0.005,
    },
}

_SYSTEM_CONVERT = {
    "rho_0_db": ("rho_0", db_to_linear),
    "phi_sic_db": ("phi_sic", db_to_linear),
    "sigma2_b_dbm": ("sigma2_b", dbm_to_watt),
    "sigma2_c_dbm": ("sigma2_c", dbm_to_watt),
    "sigma2_w_dbm": ("sigma2_w", dbm_to_watt),
    "P_max_dbw": ("P_max", dbw_to_watt),
    "P_j_max_dbw": ("P_j_max", dbw_to_watt),
}
_SYSTEM_PLAIN = ("M", "N", "alpha", "d_AR", "d_rb", "d_rc", "d_rw",
                 "epsilon", "iota", "kappa", "R_star")
_AXIS_KEYS = {"name", "var", "values", "fixed", "warm_from"}


class ConfigError(ValueError):
    """Invalid configuration. ``problems`` maps dotted key paths to messages."""

    def __init__(self, problems: dict):
        self.problems = dict(problems)
        lines = [f"  {k}: {v}" for k, v in sorted(self.problems.items())]
        super().__init__("invalid configuration:\n" + "\n".join(lines))


@dataclass(frozen=True)
class Axis:
    name: str
    var: str
    values: tuple
    fixed: dict = field(default_factory=dict)
    warm_from: str | None = None


@dataclass(frozen=True)
class Config:
    raw: dict
    seed: int
    system: dict
    solver: dict
    sweep: dict
    axes: tuple
    validate: dict

    @property
    def hash(self) -> str:
        """SHA-256 over the canonical JSON of the merged configuration."""
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def params(self, **overrides) -> SystemParams:
        """System constants in linear units, with optional unit-suffixed overrides."""
        sysd = dict(self.system)
        sysd.update(overrides)
        return system_params(sysd)

    def with_seed(self, seed: int) -> "Config":
        raw = copy.deepcopy(self.raw)
        raw["seed"] = int(seed)
        return from_dict(raw, merge=False)


def system_params(sysd: dict) -> SystemParams:
    kw = {}
    for key, (name, conv) in _SYSTEM_CONVERT.items():
        kw[name] = float(conv(sysd[key]))
    for key in _SYSTEM_PLAIN:
        kw[key] = sysd[key]
    kw["M"], kw["N"] = int(kw["M"]), int(kw["N"])
    return SystemParams(**kw)


def _merge(base: dict, user: dict, path: str, problems: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in user.items():
        where = f"{path}.{key}" if path else str(key)
        if key not in base:
            problems[where] = "unknown key"
        elif isinstance(base[key], dict) and key != "fixed":
            if not isinstance(val, dict):
                problems[where] = "expected a mapping"
            else:
                out[key] = _merge(base[key], val, where, problems)
        else:
            out[key] = val
    return out


def _check_number(d: dict, key: str, path: str, problems: dict, *, integer=False,
                  lo=None, hi=None, lo_open=False, hi_open=False):
    v = d.get(key)
    where = f"{path}.{key}" if path else key
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        problems[where] = f"expected a number, got {v!r}"
        return
    if integer and int(v) != v:
        problems[where] = f"expected an integer, got {v!r}"
        return
    if lo is not None and (v <= lo if lo_open else v < lo):
        problems[where] = f"must be {'>' if lo_open else '>='} {lo}, got {v!r}"
    if hi is not None and (v >= hi if hi_open else v > hi):
        problems[where] = f"must be {'<' if hi_open else '<='} {hi}, got {v!r}"


def _validate(cfg: dict, problems: dict) -> tuple:
    _check_number(cfg, "seed", "", problems, integer=True, lo=0)

    s = cfg["system"]
    for key in ("M", "N"):
        _check_number(s, key, "system", problems, integer=True, lo=1)
    for key in ("d_AR", "d_rb", "d_rc", "d_rw", "alpha", "R_star"):
        _check_number(s, key, "system", problems, lo=0, lo_open=key != "R_star")
    for key in ("epsilon", "iota", "kappa"):
        _check_number(s, key, "system", problems, lo=0, hi=1, lo_open=True, hi_open=True)
    for key in _SYSTEM_CONVERT:
        _check_number(s, key, "system", problems)

    sv = cfg["solver"]
    _check_number(sv, "epsilon_tol", "solver", problems, lo=0, lo_open=True)
    _check_number(sv, "max_outer", "solver", problems, integer=True, lo=1)
    _check_number(sv, "max_inner", "solver", problems, integer=True, lo=0)
    _check_number(sv, "feas_tol", "solver", problems, lo=0)
    _check_number(sv, "beta_floor", "solver", problems, lo=0, hi=0.5, hi_open=True)
    _check_number(sv, "penalty", "solver", problems, lo=0, lo_open=True)
    if sv.get("gap") not in ("absolute", "relative"):
        problems["solver.gap"] = "must be 'absolute' or 'relative'"

    sw = cfg["sweep"]
    _check_number(sw, "seeds", "sweep", problems, integer=True, lo=1)
    _check_number(sw, "starts", "sweep", problems, integer=True, lo=1)
    _check_number(sw, "reflect_ratio", "sweep", problems, lo=0, hi=1)
    for key in ("warm_chain", "random_when_warm", "record_timing"):
        if not isinstance(sw.get(key), bool):
            problems[f"sweep.{key}"] = "expected true or false"
    schemes = sw.get("schemes")
    if not isinstance(schemes, list) or not schemes or any(x not in SCHEMES for x in schemes):
        problems["sweep.schemes"] = f"expected a non-empty subset of {list(SCHEMES)}"

    axes = []
    raw_axes = sw.get("axes")
    if not isinstance(raw_axes, list):
        problems["sweep.axes"] = "expected a list"
        raw_axes = []
    names = set()
    for i, ax in enumerate(raw_axes):
        where = f"sweep.axes[{i}]"
        if not isinstance(ax, dict):
            problems[where] = "expected a mapping"
            continue
        for key in set(ax) - _AXIS_KEYS:
            problems[f"{where}.{key}"] = "unknown key"
        name = ax.get("name", f"axis{i}")
        if name in names:
            problems[f"{where}.name"] = f"duplicate axis name {name!r}"
        names.add(name)
        var = ax.get("var")
        if var not in SWEEP_VARS:
            problems[f"{where}.var"] = f"must be one of {list(SWEEP_VARS)}"
        values = ax.get("values")
        if (not isinstance(values, list) or not values
                or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in values)):
            problems[f"{where}.values"] = "expected a non-empty list of numbers"
            values = []
        fixed = ax.get("fixed", {}) or {}
        if not isinstance(fixed, dict):
            problems[f"{where}.fixed"] = "expected a mapping"
            fixed = {}
        for key in fixed:
            if key not in s:
                problems[f"{where}.fixed.{key}"] = "unknown system key"
        warm = ax.get("warm_from")
        if warm is not None and warm not in names - {name}:
            problems[f"{where}.warm_from"] = "must name an earlier axis"
        if var in SWEEP_VARS and values:
            trial = dict(s)
            trial.update(fixed)
            for v in values:
                trial[var] = v
                try:
                    system_params(trial)
                except (ValueError, TypeError, KeyError) as exc:
                    problems[f"{where}.values"] = f"value {v!r}: {exc}"
                    break
        axes.append(Axis(name, var, tuple(values), dict(fixed), warm))

    v = cfg["validate"]
    for key in ("dep_configs", "dep_taus", "dep_samples", "outage_configs", "outage_samples",
                "grid_configs", "grid_points", "fd_points", "avg_configs", "avg_samples"):
        _check_number(v, key, "validate", problems, integer=True, lo=1)
    for key in ("dep_tol", "outage_tol", "fd_h_rel", "fd_tol", "avg_tol"):
        _check_number(v, key, "validate", problems, lo=0, lo_open=True)
    return tuple(axes)


def from_dict(user: dict | None, merge: bool = True) -> Config:
    """Merge ``user`` over the defaults and validate."""
    problems: dict = {}
    user = user or {}
    if not isinstance(user, dict):
        raise ConfigError({"<root>": "expected a mapping"})
    cfg = _merge(DEFAULTS, user, "", problems) if merge else copy.deepcopy(user)
    axes = _validate(cfg, problems)
    if not problems:
        try:
            system_params(cfg["system"])
        except (ValueError, TypeError) as exc:
            problems["system"] = str(exc)
    if problems:
        raise ConfigError(problems)
    return Config(cfg, int(cfg["seed"]), cfg["system"], cfg["solver"], cfg["sweep"],
                  axes, cfg["validate"])


def load(path) -> Config:
    """Read and validate a YAML configuration file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError({"<file>": f"not valid YAML: {exc}"}) from None
    return from_dict(data)
