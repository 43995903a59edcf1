"""Command-line interface: ``solve``, ``oracle``, and ``check``.

Exit codes: 0 success, 1 a requested check failed, 2 bad configuration or
usage, 3 assumption validation rejected the schedules (use ``--force``).
The output directory can be overridden with ``--out`` or the ``VMADMM_OUT``
environment variable.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .errors import ConfigError, OracleError, VmAdmmError
from .experiments import load_config, run_experiment
from .problems import build_problem, oracle


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="vmadmm",
        description="Variable-metric proximal splitting runner with certificates",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run an experiment from a config file")
    solve.add_argument("--config", required=True, help="path to a JSON run config")
    solve.add_argument("--iters", type=int, default=None, help="override iteration count")
    solve.add_argument("--force", action="store_true",
                       help="run even when no convergence assumption holds")
    solve.add_argument("--out", default=None, help="output directory override")

    orc = sub.add_parser("oracle", help="compute a certified saddle point")
    orc.add_argument("--config", required=True)
    orc.add_argument("--budget", type=int, default=None, help="iteration budget")
    orc.add_argument("--out", default=None)

    chk = sub.add_parser("check", help="validate a run log against an oracle file")
    chk.add_argument("--log", required=True, help="path to log.csv")
    chk.add_argument("--against", required=True, help="path to oracle.json")
    chk.add_argument("--kkt-tol", type=float, default=1e-6)
    return parser


def _out_dir(arg, cfg):
    return arg or os.environ.get("VMADMM_OUT") or cfg.out_dir


def _cmd_solve(args):
    cfg = load_config(args.config)
    if args.iters is not None:
        cfg.iters = args.iters
    result = run_experiment(cfg, force=args.force, out_dir=_out_dir(args.out, cfg))
    if result.csv_path:
        print(f"log: {result.csv_path}")
        print(f"summary: {result.summary_path}")
    return result.exit_code


def _cmd_oracle(args):
    cfg = load_config(args.config)
    params = {k: v for k, v in cfg.problem.items() if k != "name"}
    params["c"] = cfg.c
    problem, _ = build_problem(cfg.problem["name"], **params)
    budget = args.budget if args.budget is not None else cfg.oracle_budget
    result = oracle(problem, budget=budget)
    directory = _out_dir(args.out, cfg)
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, "oracle.json")
    payload = {
        "problem": cfg.problem,
        "c": cfg.c,
        "x": list(result.x),
        "z": list(result.z),
        "y": list(result.y),
        "kkt": result.kkt,
        "iterations": result.iterations,
    }
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    print(f"oracle: {path} (kkt={result.kkt:.3e}, iterations={result.iterations})")
    return 0


def _cmd_check(args):
    with open(args.against, "r", encoding="utf-8") as fh:
        against = json.load(fh)
    with open(args.log, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        print("log is empty; nothing to check")
        return 0

    failures = []
    last_k = 0
    for row in rows:
        k = int(row["k"])
        if k <= last_k:
            failures.append(f"row order: k={k} after k={last_k}")
            break
        last_k = k

    final_kkt = float(rows[-1]["kkt"])
    if not (final_kkt < args.kkt_tol):
        failures.append(f"final kkt {final_kkt:.3e} >= {args.kkt_tol:g}")

    # When dual vectors were logged, the primal residual must equal the
    # rescaled dual step exactly (to 1e-12).
    y_cols = sorted(
        (c for c in rows[0] if c.startswith("y_")), key=lambda s: int(s[2:])
    )
    if y_cols:
        # The k=0 dual iterate is not in the log, so the identity is checked
        # from the second logged row onward.
        c_pen = float(against["c"])
        worst = 0.0
        y_prev = None
        for row in rows:
            y = np.array([float(row[c]) for c in y_cols])
            if y_prev is not None:
                recomputed = float(np.linalg.norm(y - y_prev)) / c_pen
                worst = max(worst, abs(recomputed - float(row["residual_primal"])))
            y_prev = y
        if worst > 1e-12:
            failures.append(f"residual/dual-step identity violated by {worst:.3e}")
        else:
            print(f"dual identity: max deviation {worst:.3e}")

    oracle_kkt = float(against["kkt"])
    print(f"oracle kkt: {oracle_kkt:.3e}; final logged kkt: {final_kkt:.3e}")
    for msg in failures:
        print(f"FAIL: {msg}")
    if not failures:
        print("check passed")
    return 0 if not failures else 1


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "oracle":
            return _cmd_oracle(args)
        if args.command == "check":
            return _cmd_check(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OracleError as exc:
        print(f"oracle error: {exc}", file=sys.stderr)
        return 2
    except VmAdmmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    parser.error(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
