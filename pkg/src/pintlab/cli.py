"""Command-line driver: run a configured experiment, tabulate its summary.

A config is a single JSON object; see ``parse_config`` for the schema. The
``run`` subcommand executes the sequential oracle, the synchronous
iteration, and one asynchronous run per configured schedule, then writes
``report.json`` and ``summary.csv`` (and per-run traces when asked to).
Reruns of the same config are byte-identical.

Exit codes: 0 success, 1 configuration error, 2 a run failed to converge.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .analysis import (
    CostParams,
    async_convergence_check,
    async_cost,
    async_error_envelope,
    check_finite_termination,
    contraction_factors,
    fit_overhead,
    sequential_cost,
    speedup_bound,
    sync_convergence_check,
    sync_cost,
)
from .async_engine import AsyncSchedule, AsyncTrace, update_counts, validate_schedule
from .async_parareal import run_async_parareal
from .errors import ConfigError, HorizonExhausted, UnfittableError
from .linalg import NormKind, max_block_norm
from .model import (
    LinearIVP,
    PROPAGATOR_RULES,
    TimeDecomposition,
    heat1d_system,
    scalar_decay_system,
)
from .parareal import STOP_KMAX, coarse_init, run_parareal, sequential_fine_solve

log = logging.getLogger("pintlab")

MODE_ORDER = {"sequential": 0, "sync": 1, "async": 2}

SUMMARY_COLUMNS = [
    "label", "p", "mode", "policy", "seed", "delay_bound", "iterations",
    "events", "model_cost", "fitted_overhead", "error_vs_oracle",
    "sync_factor", "async_factor", "sync_margin", "async_margin",
    "stop_reason",
]

TABLE_COLUMNS = [
    "p", "mode", "schedule", "iterations", "model_cost", "fitted_overhead",
    "error_vs_oracle",
]


@dataclass(frozen=True)
class PropagatorSpec:
    """Named one-interval integrator: rule key plus substep count."""

    rule: str
    steps: int

    def to_dict(self) -> dict:
        return {"rule": self.rule, "steps": self.steps}


@dataclass
class ExperimentConfig:
    label: str
    ivp: LinearIVP
    p: int
    fine: PropagatorSpec
    coarse: PropagatorSpec
    epsilon: float
    k_max: int | None
    norm_kind: NormKind
    schedules: list[AsyncSchedule] = field(default_factory=list)
    fine_cost: float | None = None      # None: use the propagator's own units
    coarse_cost: float | None = None
    overhead: float | None = None

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "problem": self.ivp.to_dict(),
            "p": self.p,
            "fine": self.fine.to_dict(),
            "coarse": self.coarse.to_dict(),
            "epsilon": self.epsilon,
            "k_max": self.k_max,
            "norm": self.norm_kind.value,
            "schedules": [s.to_dict() for s in self.schedules],
            "costs": {
                "fine_cost": self.fine_cost,
                "coarse_cost": self.coarse_cost,
                "overhead": self.overhead,
            },
        }


def _expect(raw: dict, key: str, kinds, where: str, required: bool = True,
            default=None):
    if key not in raw:
        if required:
            raise ConfigError(f"{where}: missing required field '{key}'")
        return default
    value = raw[key]
    if kinds is not None and not isinstance(value, kinds):
        raise ConfigError(
            f"{where}.{key}: expected {getattr(kinds, '__name__', kinds)}, "
            f"got {type(value).__name__}"
        )
    return value


def _parse_problem(raw, where: str) -> LinearIVP:
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: must be an object")
    if "name" in raw:
        name = raw["name"]
        builders = {
            "heat1d": (heat1d_system, {
                "n_interior": 8, "length": 1.0, "boundary_left": 23.0,
                "boundary_right": 23.0, "initial_temp": 30.0, "t_final": 0.2,
            }),
            "scalar-decay": (scalar_decay_system, {
                "rate": 1.0, "initial": 1.0, "t_final": 1.0,
            }),
        }
        if name not in builders:
            raise ConfigError(f"{where}.name: unknown built-in problem '{name}'")
        builder, defaults = builders[name]
        unknown = sorted(set(raw) - {"name"} - set(defaults))
        if unknown:
            raise ConfigError(
                f"{where}: unknown parameters for '{name}': {', '.join(unknown)}"
            )
        kwargs = {k: raw.get(k, v) for k, v in defaults.items()}
        try:
            return builder(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: bad parameter for '{name}': {exc}") from exc
    try:
        return LinearIVP.from_dict(raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: invalid inline system: {exc}") from exc


def _parse_propagator(raw, where: str) -> PropagatorSpec:
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: must be an object")
    rule = _expect(raw, "rule", str, where)
    if rule not in PROPAGATOR_RULES:
        known = ", ".join(sorted(PROPAGATOR_RULES))
        raise ConfigError(f"{where}.rule: unknown rule '{rule}' (known: {known})")
    steps = _expect(raw, "steps", int, where)
    if isinstance(steps, bool) or steps < 1:
        raise ConfigError(f"{where}.steps: need a positive integer, got {steps!r}")
    return PropagatorSpec(rule=rule, steps=steps)


def _parse_schedule(raw, where: str) -> AsyncSchedule:
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: must be an object")
    try:
        return AsyncSchedule.from_dict(raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a decoded JSON object into an ExperimentConfig.

    Schema (top level): label, problem, p, fine, coarse, epsilon,
    optional k_max, optional norm ("spectral"|"infinity"), optional
    schedules (list), optional costs {fine_cost, coarse_cost, overhead}.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a JSON object")
    label = _expect(raw, "label", str, "config", required=False, default="experiment")
    ivp = _parse_problem(_expect(raw, "problem", dict, "config"), "config.problem")
    p = _expect(raw, "p", int, "config")
    if isinstance(p, bool) or p < 1:
        raise ConfigError(f"config.p: need a positive integer, got {p!r}")
    fine = _parse_propagator(_expect(raw, "fine", dict, "config"), "config.fine")
    coarse = _parse_propagator(_expect(raw, "coarse", dict, "config"), "config.coarse")
    epsilon = _expect(raw, "epsilon", (int, float), "config", required=False, default=0.0)
    if isinstance(epsilon, bool) or epsilon < 0.0:
        raise ConfigError(f"config.epsilon: need a number >= 0, got {epsilon!r}")
    k_max = _expect(raw, "k_max", int, "config", required=False)
    if k_max is not None and (isinstance(k_max, bool) or k_max < 1):
        raise ConfigError(f"config.k_max: need a positive integer, got {k_max!r}")
    norm_name = _expect(raw, "norm", str, "config", required=False, default="spectral")
    try:
        norm_kind = NormKind(norm_name)
    except ValueError as exc:
        raise ConfigError(f"config.norm: unknown norm '{norm_name}'") from exc
    raw_schedules = _expect(raw, "schedules", list, "config", required=False, default=[])
    schedules = [
        _parse_schedule(s, f"config.schedules[{i}]")
        for i, s in enumerate(raw_schedules)
    ]
    costs = _expect(raw, "costs", dict, "config", required=False, default={})
    def cost_field(key):
        v = _expect(costs, key, (int, float), "config.costs", required=False)
        if v is not None and (isinstance(v, bool) or v < 0.0):
            raise ConfigError(f"config.costs.{key}: need a number >= 0, got {v!r}")
        return None if v is None else float(v)
    known_top = {"label", "problem", "p", "fine", "coarse", "epsilon", "k_max",
                 "norm", "schedules", "costs"}
    unknown = sorted(set(raw) - known_top)
    if unknown:
        raise ConfigError(f"config: unknown fields: {', '.join(unknown)}")
    return ExperimentConfig(
        label=label, ivp=ivp, p=p, fine=fine, coarse=coarse,
        epsilon=float(epsilon), k_max=k_max, norm_kind=norm_kind,
        schedules=schedules,
        fine_cost=cost_field("fine_cost"),
        coarse_cost=cost_field("coarse_cost"),
        overhead=cost_field("overhead"),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config '{path}': {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config '{path}' is not valid JSON: {exc}") from exc
    return parse_config(raw)


def _schedule_tag(sched: AsyncSchedule) -> str:
    return f"{sched.policy}/s{sched.seed}/D{sched.delay_bound}"


def run_experiment(config: ExperimentConfig, out_dir: str | Path,
                   write_traces: bool = False) -> tuple[dict, int]:
    """Execute every run in the config and write report.json + summary.csv.

    Returns (report, exit_code); exit code 2 flags at least one run that
    stopped without converging (iteration cap or event horizon).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    traces_dir = out / "traces"
    if write_traces:
        traces_dir.mkdir(exist_ok=True)

    ivp = config.ivp
    p = config.p
    span = ivp.t_final / p
    fine_rule = PROPAGATOR_RULES[config.fine.rule]
    coarse_rule = PROPAGATOR_RULES[config.coarse.rule]
    fine = fine_rule(ivp, span, config.fine.steps)
    coarse = coarse_rule(ivp, span, config.coarse.steps)
    decomposition = TimeDecomposition(
        p=p, coarse_dt=span, fine_dt=span / config.fine.steps
    )
    log.info("problem %s: dim=%d p=%d span=%g", ivp.label, ivp.dim, p, span)

    fine_cost = config.fine_cost if config.fine_cost is not None else fine.cost_units
    coarse_cost = (
        config.coarse_cost if config.coarse_cost is not None else coarse.cost_units
    )
    overhead = config.overhead if config.overhead is not None else coarse_cost

    report_con = contraction_factors(coarse, fine, p, kind=config.norm_kind)
    sync_ok = sync_convergence_check(report_con)
    async_ok = async_convergence_check(report_con)

    oracle = sequential_fine_solve(fine, ivp.u0, p)
    initial = coarse_init(coarse, ivp.u0, p)

    exit_code = 0
    rows: list[dict] = []
    runs: list[dict] = []

    seq_params = CostParams(p=p, fine_cost=fine_cost, coarse_cost=coarse_cost,
                            overhead=overhead)
    rows.append({
        "label": config.label, "p": p, "mode": "sequential", "policy": "",
        "seed": "", "delay_bound": "", "iterations": "", "events": "",
        "model_cost": repr(sequential_cost(seq_params)), "fitted_overhead": "",
        "error_vs_oracle": repr(0.0),
        "sync_factor": repr(report_con.sync_factor),
        "async_factor": repr(report_con.async_factor),
        "sync_margin": repr(sync_ok.margin),
        "async_margin": repr(async_ok.margin),
        "stop_reason": "",
    })

    sync_trace = run_parareal(coarse, fine, ivp.u0, p,
                              epsilon=config.epsilon, k_max=config.k_max)
    k = sync_trace.k_final
    sync_params = CostParams(p=p, fine_cost=fine_cost, coarse_cost=coarse_cost,
                             overhead=overhead, k=k)
    sync_model_cost = sync_cost(sync_params)
    try:
        fitted = repr(fit_overhead(sync_model_cost, p, k, fine_cost, coarse_cost))
    except UnfittableError:
        fitted = ""
    sync_err = (sync_trace.iterates[-1] - oracle).max_abs()
    if sync_trace.stop_reason == STOP_KMAX:
        exit_code = 2
    rows.append({
        "label": config.label, "p": p, "mode": "sync", "policy": "", "seed": "",
        "delay_bound": "", "iterations": k, "events": "",
        "model_cost": repr(sync_model_cost), "fitted_overhead": fitted,
        "error_vs_oracle": repr(sync_err),
        "sync_factor": repr(report_con.sync_factor),
        "async_factor": repr(report_con.async_factor),
        "sync_margin": repr(sync_ok.margin),
        "async_margin": repr(async_ok.margin),
        "stop_reason": sync_trace.stop_reason,
    })
    runs.append({
        "mode": "sync", "iterations": k, "stop_reason": sync_trace.stop_reason,
        "model_cost": sync_model_cost, "error_vs_oracle": sync_err,
        "deltas": list(sync_trace.deltas),
        "finite_termination_index": check_finite_termination(sync_trace, oracle),
    })
    if write_traces:
        (traces_dir / f"{config.label}-sync.json").write_text(
            sync_trace.to_json(), encoding="utf-8"
        )

    for sched in config.schedules:
        tag = _schedule_tag(sched)
        eps = config.epsilon if config.epsilon > 0.0 else None
        try:
            trace = run_async_parareal(coarse, fine, ivp.u0, p, sched, epsilon=eps)
            horizon_hit = False
        except HorizonExhausted as exc:
            trace = exc.trace
            horizon_hit = True
            exit_code = 2
            log.warning("schedule %s exhausted its event horizon", tag)
        assert isinstance(trace, AsyncTrace)
        counts, kappa = update_counts(trace)
        final = trace.state_after(len(trace.events) - 1)
        err = (final - oracle).max_abs()
        validation = validate_schedule(trace)
        stop_reason = "horizon" if horizon_hit else trace.stop_reason
        run_entry = {
            "mode": "async", "schedule": sched.to_dict(), "tag": tag,
            "events": len(trace.events), "kappa": kappa,
            "per_component_counts": counts.tolist(),
            "stop_reason": stop_reason,
            "model_cost": async_cost(CostParams(
                p=p, fine_cost=fine_cost, coarse_cost=coarse_cost,
                overhead=overhead, kappa=kappa)),
            "error_vs_oracle": err,
            "schedule_valid": validation.ok,
            "finite_termination_index": check_finite_termination(trace, oracle),
        }
        if async_ok.holds:
            sigmas, bounds = async_error_envelope(trace, report_con, oracle, initial)
            measured = [
                max_block_norm(trace.state_after(i - 1) - oracle, config.norm_kind)
                for i in range(len(trace.events) + 1)
            ]
            slack = 1.0 + 1e-10
            run_entry["envelope_ok"] = bool(all(
                m <= b * slack or (b == 0.0 and m == 0.0)
                for m, b in zip(measured, bounds)
            ))
            run_entry["sigma_final"] = (
                None if sigmas[-1] == float("inf") else float(sigmas[-1])
            )
            run_entry["bound_final"] = float(bounds[-1])
        if not horizon_hit and k <= kappa:
            ratio = speedup_bound(CostParams(
                p=p, fine_cost=fine_cost, coarse_cost=coarse_cost,
                overhead=overhead, k=k, kappa=kappa))
            run_entry["speedup_bound"] = ratio.bound
            run_entry["speedup_achieved"] = ratio.achieved
        runs.append(run_entry)
        rows.append({
            "label": config.label, "p": p, "mode": "async",
            "policy": sched.policy, "seed": sched.seed,
            "delay_bound": sched.delay_bound, "iterations": kappa,
            "events": len(trace.events),
            "model_cost": repr(run_entry["model_cost"]), "fitted_overhead": "",
            "error_vs_oracle": repr(err),
            "sync_factor": repr(report_con.sync_factor),
            "async_factor": repr(report_con.async_factor),
            "sync_margin": repr(sync_ok.margin),
            "async_margin": repr(async_ok.margin),
            "stop_reason": stop_reason,
        })
        if write_traces:
            name = f"{config.label}-{sched.policy}-s{sched.seed}-D{sched.delay_bound}.jsonl"
            (traces_dir / name).write_text(trace.to_jsonl(), encoding="utf-8")

    report = {
        "config": config.to_dict(),
        "decomposition": decomposition.to_dict(),
        "costs": {"fine_cost": fine_cost, "coarse_cost": coarse_cost,
                  "overhead": overhead},
        "contraction": report_con.to_dict(),
        "sync_convergent": {"holds": sync_ok.holds, "margin": sync_ok.margin},
        "async_convergent": {"holds": async_ok.holds, "margin": async_ok.margin},
        "sequential_cost": sequential_cost(seq_params),
        "runs": runs,
        "exit_code": exit_code,
    }
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "summary.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    return report, exit_code


def emit_table(summary_path: str | Path, out_path: str | Path) -> None:
    """Condense a summary.csv into the short comparison table."""
    try:
        with open(summary_path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read summary '{summary_path}': {exc}") from exc
    for col in SUMMARY_COLUMNS:
        if rows and col not in rows[0]:
            raise ConfigError(f"summary '{summary_path}' lacks column '{col}'")

    def sort_key(row):
        return (
            int(row["p"]),
            MODE_ORDER.get(row["mode"], 99),
            row["policy"],
            int(row["seed"]) if row["seed"] else -1,
            int(row["delay_bound"]) if row["delay_bound"] else -1,
        )

    out_rows = []
    for row in sorted(rows, key=sort_key):
        if row["mode"] == "async":
            schedule = f"{row['policy']}/s{row['seed']}/D{row['delay_bound']}"
        else:
            schedule = "-"
        fitted = row["fitted_overhead"]
        out_rows.append({
            "p": row["p"],
            "mode": row["mode"],
            "schedule": schedule,
            "iterations": row["iterations"] or "-",
            "model_cost": f"{float(row['model_cost']):.6g}",
            "fitted_overhead": f"{float(fitted):.6g}" if fitted else "-",
            "error_vs_oracle": f"{float(row['error_vs_oracle']):.2E}",
        })
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TABLE_COLUMNS)
        writer.writeheader()
        writer.writerows(out_rows)


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pintlab",
        description="Desk-scale synchronous/asynchronous parallel-in-time lab",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="execute a configured experiment")
    run_p.add_argument("--config", required=True, help="path to the JSON config")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--traces", action="store_true",
                       help="also write per-run traces under <out>/traces/")
    run_p.add_argument("--seed-override", type=int, default=None, metavar="N",
                       help="replace schedule seeds with N, N+1, ...")
    table_p = sub.add_parser("table", help="condense a summary.csv")
    table_p.add_argument("--in", dest="in_path", required=True,
                         help="summary.csv produced by 'run'")
    table_p.add_argument("--out", required=True, help="output CSV path")
    return parser


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("PINTLAB_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_arg_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = load_config(args.config)
            if args.seed_override is not None:
                config.schedules = [
                    AsyncSchedule(seed=args.seed_override + i,
                                  delay_bound=s.delay_bound, policy=s.policy,
                                  max_events=s.max_events)
                    for i, s in enumerate(config.schedules)
                ]
            _report, code = run_experiment(config, args.out,
                                           write_traces=args.traces)
            if code != 0:
                print("warning: at least one run stopped before converging",
                      file=sys.stderr)
            return code
        emit_table(args.in_path, args.out)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
