"""Seeded sweeps of the covert-rate optimization over epsilon, N, M or P_max.

Work is split by channel seed: one job solves every axis, value and scheme
for a single seed, in a fixed order, so warm starts can be passed along and
the output does not depend on how jobs are scheduled.

Common random numbers: a seed draws one channel realization at the largest
N and M any axis needs, and smaller systems use its leading block. Random
starts come from substreams keyed by (seed, start) only.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import Config
from .gcmma import SubproblemError, optimize
from .model import ChannelRealization, DesignLayout, sample_channels
from .problem import baseline_ris_instance, is_feasible, make_instance

log = logging.getLogger(__name__)

CSV_COLUMNS = ("sweep_var", "sweep_value", "scheme", "seed_count", "mean_rate",
               "std_rate", "feasible_count", "wall_ms")
_CHANNEL_KEY = 0
_START_KEY = 1


@dataclass
class RunRecord:
    axis: str
    value_index: int
    scheme: str
    seed_index: int
    rate: float
    feasible: bool
    wall_ms: float
    x: np.ndarray = field(repr=False, default=None)
    traces: list = field(repr=False, default_factory=list)


# --------------------------------------------------------------------------
# building blocks


def channels_for_seed(cfg: Config, seed_index: int) -> ChannelRealization:
    """One realization at the largest dimensions used by any axis."""
    N_max, M_max = int(cfg.system["N"]), int(cfg.system["M"])
    for ax in cfg.axes:
        N_max = max(N_max, int(ax.fixed.get("N", N_max)))
        M_max = max(M_max, int(ax.fixed.get("M", M_max)))
        if ax.var == "N":
            N_max = max(N_max, *map(int, ax.values))
        if ax.var == "M":
            M_max = max(M_max, *map(int, ax.values))
    params = cfg.params(N=N_max, M=M_max)
    ss = np.random.SeedSequence(cfg.seed, spawn_key=(_CHANNEL_KEY, seed_index))
    return sample_channels(params, ss)


def sub_channels(ch: ChannelRealization, N: int, M: int) -> ChannelRealization:
    ch = ch.truncate(N)
    if M == ch.M:
        return ch
    return ChannelRealization(H_AR=ch.H_AR[:, :M], h_rb=ch.h_rb, h_rc=ch.h_rc,
                              h_rw=ch.h_rw, h_cc=ch.h_cc, l_AR=ch.l_AR, l_rb=ch.l_rb,
                              l_rc=ch.l_rc, l_rw=ch.l_rw)


def start_rng(cfg: Config, seed_index: int, start: int) -> np.random.Generator:
    ss = np.random.SeedSequence(cfg.seed, spawn_key=(_START_KEY, seed_index, start))
    return np.random.default_rng(ss)


def adapt_start(x: np.ndarray, old: DesignLayout, new: DesignLayout, x_min, x_max) -> np.ndarray:
    """Carry a design to another (M, N); new entries get a half split, zero phase."""
    out = np.zeros(new.size)
    out[new.slices["beta_r"]] = 0.5
    for name, sl in new.slices.items():
        src = x[old.slices[name]]
        k = min(src.size, sl.stop - sl.start)
        out[sl.start:sl.start + k] = src[:k]
    return np.clip(out, x_min, x_max)


def rank_warm_starts(inst, starts: list) -> list:
    """Order warm starts by merit; only the first is optimized, all are kept."""
    merits = [inst.transformed_objective(inst.evaluate(x, want_grad=False)[0])
              for _, x, _ in starts]
    order = np.argsort(merits, kind="stable")
    ranked = [starts[i] for i in order]
    return ranked[:1] + [(label, x, "keep-only") for label, x, _ in ranked[1:]]


def solve_instance(inst, starts: list, solver: dict, want_trace: bool = False):
    """Multi-start solve. Returns ``(rate, feasible, x, traces)``.

    ``starts`` holds ``(label, x0, keep)``. With a truthy ``keep`` the start
    point is itself a candidate, so a feasible warm start can never be lost;
    ``keep == "keep-only"`` skips the optimization from that point.
    """
    kw = dict(epsilon_tol=solver["epsilon_tol"], max_outer=solver["max_outer"],
              max_inner=solver["max_inner"], gap=solver["gap"], feas_tol=solver["feas_tol"])
    best_rate, best_x = -math.inf, None
    traces = []
    for label, x0, keep in starts:
        if keep:
            f0 = inst.evaluate(x0, want_grad=False)[0]
            if is_feasible(f0, solver["feas_tol"]) and -f0[0] > best_rate:
                best_rate, best_x = -float(f0[0]), x0.copy()
        if keep == "keep-only":
            continue
        try:
            res = optimize(inst, x0, **kw)
        except SubproblemError as exc:
            log.warning("start %s failed: %s", label, exc)
            continue
        if want_trace:
            traces.append((label, [t.as_dict() for t in res.trace]))
        if res.feasible and -res.f[0] > best_rate:
            best_rate, best_x = -float(res.f[0]), res.x.copy()
    if best_x is None:
        return 0.0, False, None, traces
    return best_rate, True, best_x, traces


# --------------------------------------------------------------------------
# one job = one channel seed


def run_seed(cfg: Config, seed_index: int, want_trace: bool = False) -> list:
    sw, solver = cfg.sweep, cfg.solver
    chain = sw["warm_chain"]
    full_ch = channels_for_seed(cfg, seed_index)
    schemes = [s for s in ("ris", "star") if s in sw["schemes"]]
    best = {}                     # (axis, value index, scheme) -> (x, layout)
    records = []
    for ax in cfg.axes:
        for vi, value in enumerate(ax.values):
            overrides = dict(ax.fixed)
            overrides[ax.var] = value
            params = cfg.params(**overrides)
            ch = sub_channels(full_ch, params.N, params.M)
            star = make_instance(params, ch, beta_floor=solver["beta_floor"],
                                 c=np.full(3, solver["penalty"]))
            layout = star.layout
            for scheme in schemes:
                inst = star if scheme == "star" else baseline_ris_instance(star, sw["reflect_ratio"])
                starts = []
                if chain:
                    warm = [best.get((ax.name, vi - 1, scheme)) if vi > 0 else None,
                            best.get((ax.warm_from, vi, scheme)) if ax.warm_from else None,
                            best.get((ax.name, vi, "ris")) if scheme == "star" else None]
                    starts = [(f"warm-{tag}", adapt_start(w[0], w[1], layout, inst.x_min,
                                                          inst.x_max), True)
                              for tag, w in zip(("prev", "axis", "ris"), warm) if w is not None]
                    starts = rank_warm_starts(inst, starts)
                if not starts or sw["random_when_warm"]:
                    for s in range(sw["starts"]):
                        starts.append((f"random-{s}",
                                       inst.random_start(start_rng(cfg, seed_index, s)), False))
                t0 = time.perf_counter()
                rate, feas, x, traces = solve_instance(inst, starts, solver, want_trace)
                wall = (time.perf_counter() - t0) * 1e3
                if x is not None:
                    best[(ax.name, vi, scheme)] = (x, layout)
                records.append(RunRecord(ax.name, vi, scheme, seed_index, rate, feas, wall,
                                         x, traces))
    return records


def _run_seed_job(args):
    cfg, seed_index, want_trace = args
    return run_seed(cfg, seed_index, want_trace)


# --------------------------------------------------------------------------
# aggregation and output


def _fmt(v: float) -> str:
    return f"{v:.10g}"


def aggregate(cfg: Config, records: list) -> dict:
    """CSV rows per axis name, ordered by value then scheme."""
    timing = cfg.sweep["record_timing"]
    by_key = {}
    for r in records:
        by_key.setdefault((r.axis, r.value_index, r.scheme), []).append(r)
    tables = {}
    for ax in cfg.axes:
        rows = []
        for vi, value in enumerate(ax.values):
            for scheme in cfg.sweep["schemes"]:
                rs = sorted(by_key.get((ax.name, vi, scheme), []), key=lambda r: r.seed_index)
                rates = np.array([r.rate for r in rs])
                rows.append([ax.var, _fmt(value), scheme, str(len(rs)),
                             _fmt(float(np.mean(rates))), _fmt(float(np.std(rates))),
                             str(sum(r.feasible for r in rs)),
                             _fmt(sum(r.wall_ms for r in rs)) if timing else ""])
        tables[ax.name] = rows
    return tables


def csv_text(cfg: Config, rows: list) -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash={cfg.hash} master_seed={cfg.seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    w.writerows(rows)
    return buf.getvalue()


def read_csv(path) -> list:
    """Rows of a sweep CSV as dicts (provenance line skipped)."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def run_sweep(cfg: Config, out_dir, jobs: int = 1, trace: bool = False) -> dict:
    """Run every seed, write ``sweep_<axis>.csv`` (and traces) under ``out_dir``.

    Returns ``{axis name: path}``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(cfg, k, trace) for k in range(cfg.sweep["seeds"])]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_seed = list(pool.map(_run_seed_job, tasks))
    else:
        per_seed = [_run_seed_job(t) for t in tasks]
    records = [r for rs in per_seed for r in rs]

    paths = {}
    for name, rows in aggregate(cfg, records).items():
        path = out_dir / f"sweep_{name}.csv"
        path.write_text(csv_text(cfg, rows), encoding="utf-8", newline="")
        paths[name] = path
    if trace:
        write_traces(cfg, records, out_dir / "traces")
    return paths


def write_traces(cfg: Config, records: list, trace_dir: Path):
    trace_dir.mkdir(parents=True, exist_ok=True)
    by_seed = {}
    for r in records:
        by_seed.setdefault(r.seed_index, []).append(r)
    axes = {ax.name: ax for ax in cfg.axes}
    for k, rs in sorted(by_seed.items()):
        lines = [json.dumps({"config_hash": cfg.hash, "master_seed": cfg.seed, "seed_index": k})]
        for r in rs:
            value = axes[r.axis].values[r.value_index]
            for label, recs in r.traces:
                for rec in recs:
                    row = {"axis": r.axis, "sweep_value": value, "scheme": r.scheme,
                           "start": label}
                    row.update(rec)
                    lines.append(json.dumps(row))
        (trace_dir / f"seed_{k:03d}.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")


def solve_single(cfg: Config, seed_index: int = 0, scheme: str = "star"):
    """Solve the base-config instance for one channel seed. Returns ``(rate, feasible, traces)``."""
    params = cfg.params()
    ss = np.random.SeedSequence(cfg.seed, spawn_key=(_CHANNEL_KEY, seed_index))
    star = make_instance(params, sample_channels(params, ss), beta_floor=cfg.solver["beta_floor"],
                         c=np.full(3, cfg.solver["penalty"]))
    inst = star if scheme == "star" else baseline_ris_instance(star, cfg.sweep["reflect_ratio"])
    starts = [(f"random-{s}", inst.random_start(start_rng(cfg, seed_index, s)), False)
              for s in range(cfg.sweep["starts"])]
    rate, feas, _, traces = solve_instance(inst, starts, cfg.solver, want_trace=True)
    return rate, feas, traces
