"""
Command-line front end: scenario files in, JSON on stdout, CSV files out

Exit codes: 0 success, 1 invalid input (arguments, scenario, model),
2 any other failure (numerics, I/O). Errors go to stderr as one JSON object.
"""
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple
import argparse
import json
import logging
import sys

import pandas as pd

from returnctl.config import settings
from returnctl.core.equilibrium import grid_minimum, solve_equilibrium
from returnctl.core.errors import InvalidScenarioError, ModelValidationError, ReturnCtlError
from returnctl.core.fluid_policy import build_policy
from returnctl.core.policy_contours import GridSpacing
from returnctl.core.scenario import Scenario, load_scenario
from returnctl.experiments.case_study import CASE_STUDY_HOLDING_COSTS, tradeoff_curve
from returnctl.experiments.comparison import Mode, compare_policies
from returnctl.experiments.harness import (
    dominance_check,
    format_summary,
    load_experiment_grid,
    run_grid,
    run_time_varying_study,
)
from returnctl.simulation.policies import build_intervention_policy
from returnctl.simulation.runner import simulate
from returnctl.utils.file_storage import write_frame_atomic, write_json_atomic
from returnctl.utils.logging_setup import configure_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2


class UsageError(ReturnCtlError):
    """Malformed command line"""
    kind = "UsageError"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


def _window(text: str) -> Tuple[float, float, float, float]:
    parts = text.split(":")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("window must be x0:x1:y0:y1")
    try:
        x0, x1, y0, y1 = (float(v) for v in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"window values must be numbers: {text}")
    if x1 < x0 or y1 < y0:
        raise argparse.ArgumentTypeError(f"empty window: {text}")
    return x0, x1, y0, y1


def _state(text: str) -> Tuple[int, int]:
    try:
        x, y = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"state must be x,y with integers: {text}")
    if x < 0 or y < 0:
        raise argparse.ArgumentTypeError(f"state must be non-negative: {text}")
    return x, y


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master random seed")
    common.add_argument("--jobs", type=int, default=None, help="worker processes (default: all CPUs)")
    common.add_argument("--out", type=Path, default=None, help="output file")

    parser = _Parser(prog="returnctl", description="Fluid policies for queues with controllable returns")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve-equilibrium", parents=[common], help="optimal constant return probability")
    p.add_argument("scenario", type=Path)
    p.add_argument("--check", action="store_true", help="also report the brute-force grid minimum")

    p = sub.add_parser("build-policy", parents=[common], help="synthesize the fluid policy")
    p.add_argument("scenario", type=Path)
    p.add_argument("--lines", type=int, default=None, help="contour lines in the table")
    p.add_argument("--tau-max", type=float, default=None, help="largest tabulated clearing time")
    p.add_argument("--spacing", choices=[s.value for s in GridSpacing], default=GridSpacing.REFINED.value)

    p = sub.add_parser("policy-grid", parents=[common], help="policy raster as CSV (x, y, p)")
    p.add_argument("scenario", type=Path)
    p.add_argument("--window", type=_window, default=(0.0, 150.0, 0.0, 150.0), help="x0:x1:y0:y1")
    p.add_argument("--step", type=float, default=1.0)

    p = sub.add_parser("policy-query", parents=[common], help="policy at one state")
    p.add_argument("scenario", type=Path)
    p.add_argument("x", type=float)
    p.add_argument("y", type=float)

    p = sub.add_parser("simulate", parents=[common], help="one stochastic run")
    p.add_argument("scenario", type=Path)
    p.add_argument("--policy", choices=["fluid", "equilibrium", "simple"], default=None)
    p.add_argument("--s0", type=_state, default=None, help="initial state x,y")
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--engine", choices=["auto", "markovian", "general"], default=None)
    p.add_argument("--events", type=Path, default=None, help="write the event log CSV here")

    p = sub.add_parser("compare", parents=[common], help="fluid policy against a benchmark")
    p.add_argument("scenario", type=Path)
    p.add_argument("--benchmark", choices=["equilibrium", "simple"], default="equilibrium")
    p.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.FINITE.value)
    p.add_argument("--s0", type=_state, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--warmup", type=float, default=None)
    p.add_argument("--batches", type=int, default=None)
    p.add_argument("--batch-length", type=float, default=None)
    p.add_argument("--paired", action="store_true", help="common random numbers, bootstrap CI")

    p = sub.add_parser("run-grid", parents=[common], help="run an experiment grid from the registry")
    p.add_argument("grid")
    p.add_argument("--config", type=Path, default=None, help="grid registry YAML")
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--no-resume", action="store_true")

    p = sub.add_parser("casestudy", parents=[common], help="holding-cost tradeoff sweep")
    p.add_argument("scenario", type=Path, nargs="?", default=None, help="defaults to the case_study grid")
    p.add_argument("--holding-costs", type=float, nargs="+", default=None)
    p.add_argument("--warmup", type=float, default=None)
    p.add_argument("--batches", type=int, default=None)
    p.add_argument("--batch-length", type=float, default=None)
    return parser


def _emit(payload: Any) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True, default=str))


def _solve_equilibrium(args: argparse.Namespace) -> Dict[str, Any]:
    scenario = load_scenario(args.scenario)
    solution = solve_equilibrium(scenario.model)
    data = solution.to_dict()
    system = scenario.model.system
    data["offered_load"] = system.offered_load
    data["utilization"] = system.utilization(solution.p_inf)
    if args.check:
        p, j = grid_minimum(scenario.model)
        data["grid_check"] = {"p": p, "J": j, "gap": solution.J_inf - j}
    if args.out:
        write_json_atomic(data, args.out)
    return data


def _build_policy(args: argparse.Namespace) -> Dict[str, Any]:
    scenario = load_scenario(args.scenario)
    policy = build_policy(
        scenario.model, tau_max=args.tau_max, n_lines=args.lines, spacing=GridSpacing(args.spacing)
    )
    if args.out and policy.table is not None:
        write_frame_atomic(policy.table.to_frame(), args.out)
    return policy.summary()


def _policy_grid(args: argparse.Namespace) -> Optional[Dict[str, Any]]:
    scenario = load_scenario(args.scenario)
    x0, x1, y0, y1 = args.window
    if args.step <= 0:
        raise UsageError("--step must be positive")
    frame = build_policy(scenario.model).raster((x0, x1), (y0, y1), args.step)
    if args.out:
        write_frame_atomic(frame, args.out)
        return {"rows": len(frame), "out": str(args.out)}
    sys.stdout.write(frame.to_csv(index=False))
    return None


def _policy_query(args: argparse.Namespace) -> Dict[str, Any]:
    scenario = load_scenario(args.scenario)
    if args.x < 0 or args.y < 0:
        raise UsageError("state must be non-negative")
    return build_policy(scenario.model).query_details(args.x, args.y).to_dict()


def _simulate(args: argparse.Namespace) -> Dict[str, Any]:
    scenario = load_scenario(args.scenario)
    kind = args.policy or scenario.policy.type
    policy = build_intervention_policy(kind, scenario.model)
    horizon = args.horizon or scenario.simulation.horizon or settings.finite_horizon
    s0 = args.s0 or tuple(scenario.simulation.s0)
    result = simulate(
        scenario, policy, s0, horizon, seed=args.seed, engine=args.engine, record_events=args.events is not None
    )
    if args.events:
        result.events_to_csv(args.events)
    data = result.to_dict()
    data["policy"] = policy.name
    if args.out:
        write_json_atomic(data, args.out)
    return data


def _compare(args: argparse.Namespace) -> Dict[str, Any]:
    scenario = load_scenario(args.scenario)
    fluid = build_intervention_policy("fluid", scenario.model)
    benchmark = build_intervention_policy(args.benchmark, scenario.model, fluid.policy.solution)
    result = compare_policies(
        scenario,
        fluid,
        benchmark,
        mode=Mode(args.mode),
        n_reps=args.reps,
        seed=args.seed,
        s0=args.s0,
        horizon=args.horizon,
        jobs=args.jobs,
        paired=args.paired,
        warmup=args.warmup,
        n_batches=args.batches,
        batch_length=args.batch_length,
    )
    row = result.to_row(scenario_id=scenario.name)
    if args.out:
        write_frame_atomic(pd.DataFrame([row]), args.out)
    return row


def _run_grid(args: argparse.Namespace) -> Dict[str, Any]:
    grid = load_experiment_grid(args.grid, args.config)
    out = args.out or settings.output_dir / f"{grid.name}.csv"
    if grid.spec.ks:
        table = run_time_varying_study(grid, out)
        print(table.to_string(index=False), file=sys.stderr)
        return {"grid": grid.name, "rows": len(table), "out": str(out)}
    table = run_grid(grid, out, jobs=args.jobs, reps=args.reps, resume=not args.no_resume)
    print(format_summary(table), file=sys.stderr)
    violations = dominance_check(table)
    return {
        "grid": grid.name,
        "rows": len(table),
        "out": str(out),
        "dominated_cells": violations.to_dict("records"),
    }


def _casestudy(args: argparse.Namespace) -> Dict[str, Any]:
    if args.scenario is not None:
        scenario: Scenario = load_scenario(args.scenario)
        holding_costs: Sequence[float] = CASE_STUDY_HOLDING_COSTS
    else:
        grid = load_experiment_grid("case_study")
        scenario = grid.base
        holding_costs = grid.spec.holding_costs or CASE_STUDY_HOLDING_COSTS
    holding_costs = args.holding_costs or holding_costs
    out = args.out or settings.output_dir / "case_study_tradeoff.csv"
    frame = tradeoff_curve(
        scenario, holding_costs, seed=args.seed, warmup=args.warmup,
        n_batches=args.batches, batch_length=args.batch_length,
    )
    write_frame_atomic(frame, out)
    return {"rows": len(frame), "out": str(out), "rel_red": frame["rel_red"].round(4).tolist()}


COMMANDS = {
    "solve-equilibrium": _solve_equilibrium,
    "build-policy": _build_policy,
    "policy-grid": _policy_grid,
    "policy-query": _policy_query,
    "simulate": _simulate,
    "compare": _compare,
    "run-grid": _run_grid,
    "casestudy": _casestudy,
}


def _fail(error: Exception) -> int:
    if isinstance(error, ReturnCtlError):
        payload = error.to_dict()
    else:
        payload = {"error": type(error).__name__, "message": str(error), "issues": []}
    print(json.dumps(payload), file=sys.stderr)
    if isinstance(error, (UsageError, InvalidScenarioError, ModelValidationError)):
        return EXIT_INVALID
    # plain ValueErrors come from argument checks below the CLI
    if isinstance(error, ValueError) and not isinstance(error, ReturnCtlError):
        return EXIT_INVALID
    return EXIT_RUNTIME


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging(settings.log)
    try:
        args = build_parser().parse_args(argv)
        payload = COMMANDS[args.command](args)
    except (ReturnCtlError, ValueError, OSError) as e:
        logger.debug("command failed", exc_info=True)
        return _fail(e)
    if payload is not None:
        _emit(payload)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
