"""Config-driven experiment runner with bit-stable CSV/JSON logging.

A run configuration is a JSON document (nested tables, canonical form sorts
keys) naming a catalog problem, the two metric schedules, the penalty, the
initial point, the iteration count, and the list of hard checks to evaluate.
Identical configurations produce byte-identical CSV logs on the same
platform: floats are printed with 17 significant digits and all test data is
generated from seeded integer arithmetic.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import diagnostics
from .errors import ConfigError, UnsupportedSetting, VmAdmmError
from .linops import MetricOperator
from .problems import build_problem, oracle
from .solver import (
    ConstantSchedule,
    GeometricDecaySchedule,
    ShiftedGramSchedule,
    StoppingRule,
    initial_state,
    run,
    validate_assumptions,
)

#: Pinned tolerances for the named hard checks.
CHECK_TOLERANCES = {
    "kkt": 1e-6,
    "gap_bound": -1e-8,
    "v_inequality": -1e-10,
    "v_monotone": 1e-10,
    "feasibility_rate": -0.45,
    "dual_identity": 1e-12,
}

#: Checks whose evaluation needs a certified saddle point.
ORACLE_CHECKS = {"gap_bound", "v_inequality", "v_monotone", "feasibility_rate"}

CSV_COLUMNS = [
    "k",
    "primal_objective",
    "lagrangian_at_probe",
    "residual_primal",
    "u_k",
    "v_k",
    "v_slack",
    "gap",
    "gap_bound",
    "kkt",
]


@dataclass
class RunConfig:
    """Everything needed to reproduce an experiment."""

    problem: dict
    metric1: dict
    metric2: dict
    c: float
    iters: int
    init: object = "zeros"
    checks: list = field(default_factory=list)
    seed: int = 0
    out_dir: str = "out"
    log_vectors: bool = False
    oracle_budget: int = 400000


_REQUIRED_KEYS = {"problem", "metric1", "metric2", "c", "iters"}
_ALL_KEYS = _REQUIRED_KEYS | {
    "init",
    "checks",
    "seed",
    "out_dir",
    "log_vectors",
    "oracle_budget",
}


def parse_config(text, source="<string>"):
    """Parse a JSON run configuration; errors carry the source and line."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a table")
    missing = _REQUIRED_KEYS - set(data)
    if missing:
        raise ConfigError(f"{source}: missing keys {sorted(missing)}")
    unknown = set(data) - _ALL_KEYS
    if unknown:
        raise ConfigError(f"{source}: unknown keys {sorted(unknown)}")
    try:
        cfg = RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    if not isinstance(cfg.problem, dict) or "name" not in cfg.problem:
        raise ConfigError(f"{source}: 'problem' needs a 'name' entry")
    if cfg.iters < 0:
        raise ConfigError(f"{source}: 'iters' must be >= 0")
    return cfg


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), source=str(path))


def serialize_config(cfg):
    """Canonical form: sorted keys, two-space indent, trailing newline."""
    return json.dumps(asdict(cfg), sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# schedule construction from config tables
# ---------------------------------------------------------------------------


def metric_from_spec(spec, dim, problem):
    kind = spec.get("kind")
    if kind == "zero":
        return MetricOperator.zero(dim)
    if kind == "scaled_identity":
        return MetricOperator.scaled_identity(dim, spec["mu"])
    if kind == "diagonal":
        return MetricOperator.diagonal(spec["entries"])
    if kind == "dense":
        return MetricOperator.dense(spec["matrix"])
    if kind == "shifted_gram":
        return MetricOperator.shifted_gram(spec["tau"], problem.c, problem.A)
    raise ConfigError(f"unknown metric kind {kind!r}")


def schedule_from_spec(spec, dim, problem):
    kind = spec.get("kind")
    if kind == "constant":
        return ConstantSchedule(metric_from_spec(spec["metric"], dim, problem))
    if kind == "geometric_decay":
        return GeometricDecaySchedule(
            metric_from_spec(spec["metric"], dim, problem), spec["rho"]
        )
    if kind == "shifted_gram":
        return ShiftedGramSchedule(spec["tau"], problem.c, problem.A)
    raise ConfigError(f"unknown schedule kind {kind!r}")


# ---------------------------------------------------------------------------
# CSV / JSON emission
# ---------------------------------------------------------------------------


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return format(float(value), ".17g")


def _min_ignoring_none(*values):
    present = [v for v in values if v is not None]
    return min(present) if present else None


def write_iterate_log(path, rows, vector_labels=None):
    """Write IterateLog rows (list of dicts) as deterministic CSV."""
    columns = list(CSV_COLUMNS)
    if vector_labels:
        columns += vector_labels
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row.get(col)) for col in columns) + "\n")


def write_summary(path, summary):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(json.dumps(summary, sort_keys=True, indent=2) + "\n")


@dataclass
class ExperimentResult:
    exit_code: int
    summary: dict
    csv_path: str | None
    summary_path: str | None
    report: object
    checks: dict


# ---------------------------------------------------------------------------
# the runner
# ---------------------------------------------------------------------------


def _initial_from_config(cfg, problem):
    if cfg.init == "zeros":
        return initial_state(problem)
    if isinstance(cfg.init, dict):
        return initial_state(
            problem,
            x0=cfg.init.get("x"),
            z0=cfg.init.get("z"),
            y0=cfg.init.get("y"),
        )
    raise ConfigError("'init' must be \"zeros\" or a table with x/z/y")


def run_experiment(cfg, force=False, out_dir=None, echo=print):
    """Validate, run, log, and check one experiment.

    Prints the assumption report, runs the solver, writes ``log.csv`` and
    ``summary.json`` into the output directory, and evaluates the requested
    hard checks. Exit code 0 iff every requested check passes; 3 when the
    assumption validation rejects the schedules and ``force`` is not set.
    """
    params = {k: v for k, v in cfg.problem.items() if k != "name"}
    params["c"] = cfg.c
    problem, metadata = build_problem(cfg.problem["name"], **params)
    sched1 = schedule_from_spec(cfg.metric1, problem.n, problem)
    sched2 = schedule_from_spec(cfg.metric2, problem.m, problem)

    horizon = max(1, min(cfg.iters, 50))
    report = validate_assumptions(problem, sched1, sched2, horizon)
    for line in report.summary_lines():
        echo(line)
    if not report.permits_run and not force:
        echo("assumption validation failed; rerun with --force to override")
        return ExperimentResult(
            exit_code=3,
            summary={},
            csv_path=None,
            summary_path=None,
            report=report,
            checks={},
        )

    init = _initial_from_config(cfg, problem)
    state, trace = run(
        problem, init, sched1, sched2, StoppingRule(max_iters=cfg.iters), force=True
    )
    K = trace.iterations

    needs_oracle = bool(ORACLE_CHECKS & set(cfg.checks))
    saddle = None
    if needs_oracle:
        orc = oracle(problem, budget=cfg.oracle_budget)
        saddle = (orc.x, orc.z, orc.y)

    rows, derived = _assemble_rows(
        problem, trace, sched1, sched2, saddle, seed=cfg.seed
    )
    checks = _evaluate_checks(cfg, problem, trace, derived)

    summary = {
        "problem": metadata,
        "iterations": K,
        "final_kkt": derived["kkt"][-1] if K else None,
        "min_gap_slack": derived["min_gap_slack"],
        "min_v_slack": derived["min_v_slack"],
        "rate_slope": derived["rate_slope"],
        "findings": {
            "uncorrected_v_min_slack": derived["uncorrected_v_min_slack"],
        },
        "checks": {
            name: {"passed": passed, "detail": detail}
            for name, (passed, detail) in checks.items()
        },
        "assumptions": {
            "condition_I": report.condition_I,
            "condition_II": report.condition_II,
            "condition_III": report.condition_III,
            "ergodic_ok": report.ergodic_ok,
        },
    }

    directory = out_dir or os.environ.get("VMADMM_OUT") or cfg.out_dir
    os.makedirs(directory, exist_ok=True)
    csv_path = os.path.join(directory, "log.csv")
    summary_path = os.path.join(directory, "summary.json")
    vector_labels = None
    if cfg.log_vectors:
        vector_labels = (
            [f"x_{i}" for i in range(problem.n)]
            + [f"z_{i}" for i in range(problem.m)]
            + [f"y_{i}" for i in range(problem.m)]
        )
        for k, row in enumerate(rows, start=1):
            row.update({f"x_{i}": val for i, val in enumerate(trace.xs[k])})
            row.update({f"z_{i}": val for i, val in enumerate(trace.zs[k])})
            row.update({f"y_{i}": val for i, val in enumerate(trace.ys[k])})
    write_iterate_log(csv_path, rows, vector_labels)
    write_summary(summary_path, summary)

    failed = [name for name, (passed, _) in checks.items() if not passed]
    for name, (passed, detail) in checks.items():
        echo(f"check {name}: {'pass' if passed else 'FAIL'} ({detail})")
    return ExperimentResult(
        exit_code=0 if not failed else 1,
        summary=summary,
        csv_path=csv_path,
        summary_path=summary_path,
        report=report,
        checks=checks,
    )


def _assemble_rows(problem, trace, sched1, sched2, saddle, seed=0):
    """Build IterateLog rows and the derived per-run quantities."""
    K = trace.iterations
    kkt_values = [
        diagnostics.kkt_residual(problem, trace.xs[k], trace.ys[k])
        for k in range(1, K + 1)
    ]

    gaps = bounds = None
    gamma0 = None
    probe_gap_min_slack = None
    if saddle is not None and K:
        averager = diagnostics.ErgodicAverager(problem.n, problem.m)
        init_state = trace.state_at(0)
        gamma0 = diagnostics.gamma(
            problem, init_state, trace.m1_0, trace.m2_0, saddle
        )
        # the gap bound is per-probe: sample a few extra probes around the
        # saddle (seeded) and check them every 10th iteration
        probes = diagnostics.sample_ball_probes(saddle, 1.0, 10, seed=seed)
        probe_gammas = [
            diagnostics.gamma(problem, init_state, trace.m1_0, trace.m2_0, p)
            for p in probes
        ]
        gaps, bounds = [], []
        for k in range(1, K + 1):
            averager.update(trace.xs[k], trace.zs[k], trace.ys[k])
            cert = diagnostics.gap_certificate(problem, averager, saddle, gamma0)
            gaps.append(cert.gap)
            bounds.append(cert.bound)
            if k % 10 == 0 or k == K:
                for probe, g0 in zip(probes, probe_gammas):
                    pc = diagnostics.gap_certificate(problem, averager, probe, g0)
                    if probe_gap_min_slack is None or pc.slack < probe_gap_min_slack:
                        probe_gap_min_slack = pc.slack

    u = v = None
    v_slacks = {}
    uncorrected_min = None
    if saddle is not None and K:
        try:
            m1_const = sched1.metric(0)
            m2_const = sched2.metric(0)
            constant = all(
                sched.metric(k) is sched.metric(0)
                for sched in (sched1, sched2)
                for k in range(min(K, 3))
            )
            if not constant:
                raise UnsupportedSetting("u/v need constant metric schedules")
            u, v = diagnostics.uv_energies(
                problem, trace, saddle, m1_const, m2_const
            )
            pairs = [
                diagnostics.SequencePair(k=k, u=float(u[k]), v_next=float(v[k + 1]))
                for k in range(1, K)
            ]
            v_slacks = dict(diagnostics.inequality_v_check(pairs, trace.zs, problem.c))
            # the stronger, uncorrected inequality is logged as a finding only
            uncorrected = diagnostics.uncorrected_v_slack(pairs)
            if uncorrected:
                uncorrected_min = min(s for _, s in uncorrected)
        except UnsupportedSetting:
            u = v = None
            v_slacks = {}

    rows = []
    for k in range(1, K + 1):
        x, z, y = trace.xs[k], trace.zs[k], trace.ys[k]
        row = {
            "k": k,
            "primal_objective": problem.f(x)
            + problem.h(x)
            + problem.g(problem.A.apply(x)),
            "residual_primal": trace.residual_norms[k - 1],
            "kkt": kkt_values[k - 1],
            "lagrangian_at_probe": (
                diagnostics.lagrangian(problem, x, z, saddle[2])
                if saddle is not None
                else None
            ),
            "u_k": float(u[k]) if u is not None else None,
            "v_k": float(v[k]) if v is not None else None,
            "v_slack": v_slacks.get(k),
            "gap": gaps[k - 1] if gaps is not None else None,
            "gap_bound": bounds[k - 1] if bounds is not None else None,
        }
        rows.append(row)

    start = max(2, min(100, K // 2)) if K else 2
    slope = diagnostics.loglog_slope(
        range(start, K + 1),
        trace.residual_norms[start - 1 : K],
    )
    derived = {
        "kkt": kkt_values,
        "gaps": gaps,
        "bounds": bounds,
        "gamma0": gamma0,
        "u": u,
        "v": v,
        "v_slacks": v_slacks,
        "min_gap_slack": (
            _min_ignoring_none(
                min(b - g for g, b in zip(gaps, bounds)), probe_gap_min_slack
            )
            if gaps
            else None
        ),
        "min_v_slack": min(v_slacks.values()) if v_slacks else None,
        "uncorrected_v_min_slack": uncorrected_min,
        "rate_slope": None if math.isinf(slope) else slope,
        "saddle": saddle,
    }
    return rows, derived


def _evaluate_checks(cfg, problem, trace, derived):
    checks = {}
    K = trace.iterations
    for name in cfg.checks:
        if name not in CHECK_TOLERANCES:
            raise ConfigError(f"unknown check {name!r}")
        try:
            checks[name] = _single_check(name, problem, trace, derived, K)
        except VmAdmmError as exc:
            checks[name] = (False, f"not evaluable: {exc}")
    return checks


def _single_check(name, problem, trace, derived, K):
    if name == "kkt":
        final = derived["kkt"][-1] if derived["kkt"] else math.inf
        return final < CHECK_TOLERANCES["kkt"], f"final_kkt={final:.3e}"
    if name == "gap_bound":
        if derived["min_gap_slack"] is None:
            return (K == 0), "no iterations"
        worst = derived["min_gap_slack"]
        return worst >= CHECK_TOLERANCES["gap_bound"], f"min_slack={worst:.3e}"
    if name == "v_inequality":
        if derived["min_v_slack"] is None:
            if derived["u"] is None:
                raise UnsupportedSetting(
                    "u/v energies unavailable (need zero smooth term, "
                    "constant metrics, and a saddle point)"
                )
            return (K <= 2), "trace too short for slacks"
        worst = derived["min_v_slack"]
        return worst >= CHECK_TOLERANCES["v_inequality"], f"min_slack={worst:.3e}"
    if name == "v_monotone":
        v = derived["v"]
        if v is None:
            raise UnsupportedSetting("v energy unavailable")
        for k in range(1, K):
            if v[k + 1] > v[k] + CHECK_TOLERANCES["v_monotone"]:
                return False, f"first violation at k={k + 1}"
        return True, "nonincreasing"
    if name == "feasibility_rate":
        u = derived["u"]
        if u is None:
            raise UnsupportedSetting("u energy unavailable")
        S = diagnostics.accumulate_step_energy(trace, problem.c)
        worst = 0.0
        for k, resid, bound in diagnostics.feasibility_rate(
            trace, problem.c, float(u[1]), S
        ):
            worst = max(worst, resid - bound)
        slope = derived["rate_slope"]
        slope_ok = slope is None or slope <= CHECK_TOLERANCES["feasibility_rate"]
        ok = worst <= 0.0 and slope_ok
        return ok, f"max_excess={worst:.3e}, slope={slope}"
    if name == "dual_identity":
        worst = 0.0
        for k in range(1, K + 1):
            dy = trace.ys[k] - trace.ys[k - 1]
            recomputed = float(np.linalg.norm(dy)) / problem.c
            worst = max(worst, abs(recomputed - trace.residual_norms[k - 1]))
        return worst <= CHECK_TOLERANCES["dual_identity"], f"max_dev={worst:.3e}"
    raise ConfigError(f"unknown check {name!r}")
