"""Command line entry point: ``starcovert {sweep,validate,solve} CONFIG``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import experiments, validation


def _load(args):
    cfg = config_mod.load(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _json_scalar(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def cmd_sweep(args) -> int:
    cfg = _load(args)
    paths = experiments.run_sweep(cfg, args.out_dir, jobs=args.jobs, trace=args.trace)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


def cmd_validate(args) -> int:
    cfg = _load(args)
    report = validation.run_checks(cfg.validate, seed=cfg.seed)
    for check in report:
        print(check.line())
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {"config_hash": cfg.hash, "master_seed": cfg.seed,
               "checks": [{"name": c.name, "passed": bool(c.passed), "error": float(c.error),
                           "tol": float(c.tol), "detail": c.detail} for c in report]}
    text = json.dumps(payload, indent=2, default=_json_scalar)
    (out / "validate.json").write_text(text + "\n", encoding="utf-8")
    failed = [c.name for c in report if not c.passed]
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def cmd_solve(args) -> int:
    cfg = _load(args)
    rate, feasible, traces = experiments.solve_single(cfg, scheme=args.scheme)
    if args.trace:
        for label, recs in traces:
            for rec in recs:
                print(json.dumps({"start": label, **rec}))
    print(f"covert rate {rate:.6f} bit/s/Hz, feasible={feasible}, "
          f"config_hash={cfg.hash} master_seed={cfg.seed}")
    return 0 if feasible else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="starcovert", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, helptext in (("sweep", cmd_sweep, "run the configured sweeps"),
                                 ("validate", cmd_validate, "run the oracle checks"),
                                 ("solve", cmd_solve, "solve one instance")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", help="YAML configuration file")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--out-dir", default="results", help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("--trace", action="store_true", help="write solver traces")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "solve":
            p.add_argument("--scheme", choices=config_mod.SCHEMES, default="star")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except config_mod.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
