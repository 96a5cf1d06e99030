"""
Experiment grids: loading from the YAML registry, running, resuming and
checking the results
"""
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union
import copy
import logging
import time

import pandas as pd
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from tabulate import tabulate

from returnctl.config import settings
from returnctl.core.equilibrium import solve_equilibrium
from returnctl.core.errors import InvalidScenarioError, UnboundedIntervalError
from returnctl.core.fluid_policy import build_policy
from returnctl.core.model import CostForm
from returnctl.core.scenario import ArrivalSpec, Scenario, parse_rate, scenario_from_dict
from returnctl.experiments.comparison import Mode, compare_policies
from returnctl.experiments.statistics import fieller_ci
from returnctl.experiments.summaries import intervention_summary
from returnctl.simulation.policies import build_intervention_policy
from returnctl.simulation.runner import estimate_longrun
from returnctl.utils.file_storage import write_frame_atomic
from returnctl.utils.seeding import cell_seed

logger = logging.getLogger(__name__)


class SweepSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    lambda_: List[float] = Field(default_factory=list, alias="lambda")
    nu: List[float] = Field(default_factory=list)
    M: List[float] = Field(default_factory=list)
    h: List[float] = Field(default_factory=list)
    cost: List[CostForm] = Field(default_factory=list)

    @field_validator("lambda_", "nu", mode="before")
    @classmethod
    def _fractions(cls, values: Any) -> Any:
        return [parse_rate(v) for v in values] if isinstance(values, list) else values


class GridSpec(BaseModel):
    """One entry of the experiment registry"""
    model_config = ConfigDict(extra="forbid")

    description: str = ""
    scenario: Dict[str, Any]
    sweep: SweepSpec = Field(default_factory=SweepSpec)
    initial_states: List[Tuple[int, int]] = Field(default_factory=list)
    horizon: float = Field(default=90.0, gt=0)
    longrun: bool = True
    benchmarks: List[str] = Field(default_factory=lambda: ["equilibrium", "simple"])
    reps: int = Field(default=2000, ge=2)
    longrun_reps: int = Field(default=1, ge=1)
    seed: int = 0
    ks: List[float] = Field(default_factory=list)
    fs: List[float] = Field(default_factory=list)
    holding_costs: List[float] = Field(default_factory=list)


@dataclass(frozen=True)
class GridCell:
    """One parameter combination of a grid"""
    cell_id: str
    params: Dict[str, Any]
    scenario: Scenario


@dataclass
class ExperimentGrid:
    name: str
    spec: GridSpec
    base: Scenario

    @property
    def seed(self) -> int:
        return self.spec.seed

    def _scenario_data(self) -> Dict[str, Any]:
        return {k: parse_rate(v) for k, v in copy.deepcopy(self.spec.scenario).items()}

    def cells(self) -> List[GridCell]:
        """Cartesian product of the sweep; every cell is validated"""
        sweep = self.spec.sweep
        base = self._scenario_data()
        axes = {
            "lambda": sweep.lambda_ or [base["lambda"]],
            "nu": sweep.nu or [base["nu"]],
            "cost": [c.value for c in sweep.cost] or [base["cost"]["type"]],
            "M": sweep.M or [base["cost"].get("M")],
            "h": sweep.h or [base["h"]],
        }
        cells = []
        for values in product(*axes.values()):
            params = dict(zip(axes.keys(), values))
            data = copy.deepcopy(base)
            data["lambda"], data["nu"], data["h"] = params["lambda"], params["nu"], params["h"]
            data["cost"] = dict(data["cost"], type=params["cost"])
            if params["M"] is not None:
                data["cost"]["M"] = params["M"]
            cell_id = (
                f"{self.name}:lam={params['lambda']:g}:nu={params['nu']:.6g}:"
                f"{params['cost']}:M={params['M']}:h={params['h']:g}"
            )
            cells.append(GridCell(cell_id, params, scenario_from_dict(data, name=cell_id)))
        return cells

    def modes(self) -> List[Tuple[Mode, Optional[Tuple[int, int]]]]:
        modes: List[Tuple[Mode, Optional[Tuple[int, int]]]] = [
            (Mode.FINITE, tuple(s0)) for s0 in self.spec.initial_states
        ]
        if self.spec.longrun:
            modes.append((Mode.LONGRUN, None))
        return modes

    def row_count(self) -> int:
        return len(self.cells()) * len(self.modes()) * len(self.spec.benchmarks)


def _read_registry(path: Optional[Union[str, Path]]) -> Dict[str, Any]:
    """The `grids` mapping of the YAML registry"""
    path = Path(path) if path is not None else settings.experiments_config_path
    try:
        with open(path, "r") as f:
            config = yaml.safe_load(f) or {}
    except OSError as e:
        raise InvalidScenarioError(f"cannot read experiment registry {path}: {e.strerror or e}") from e
    except yaml.YAMLError as e:
        raise InvalidScenarioError(f"experiment registry {path} is not valid YAML: {e}") from e
    grids = config.get("grids", {}) if isinstance(config, dict) else None
    if not isinstance(grids, dict):
        raise InvalidScenarioError(f"experiment registry {path} has no 'grids' mapping", ["grids"])
    return grids


def load_experiment_grid(name: str, path: Optional[Union[str, Path]] = None) -> ExperimentGrid:
    """
    Grid `name` from the YAML registry (settings.experiments_config_path by default)

    Raises:
        InvalidScenarioError: If the grid is missing or malformed
        ModelValidationError: If any cell violates the model assumptions
    """
    grids = _read_registry(path)
    if name not in grids:
        raise InvalidScenarioError(f"unknown grid '{name}' (available: {', '.join(sorted(grids))})")
    try:
        spec = GridSpec.model_validate(grids[name])
    except ValidationError as e:
        fields = [".".join(str(p) for p in err["loc"]) for err in e.errors()]
        raise InvalidScenarioError(f"grid '{name}' is malformed", fields) from e
    base_data = {k: parse_rate(v) for k, v in spec.scenario.items()}
    grid = ExperimentGrid(name=name, spec=spec, base=scenario_from_dict(base_data, name=name))
    grid.cells()
    return grid


def list_grids(path: Optional[Union[str, Path]] = None) -> List[str]:
    return sorted(_read_registry(path))


def _row_id(cell_id: str, benchmark: str, mode: Mode, s0: Optional[Tuple[int, int]]) -> str:
    where = f"{s0[0]}-{s0[1]}" if s0 else "longrun"
    return f"{cell_id}|{benchmark}|{mode.value}|{where}"


def run_grid(
    grid: ExperimentGrid,
    output_path: Union[str, Path],
    jobs: Optional[int] = None,
    reps: Optional[int] = None,
    resume: bool = True,
) -> pd.DataFrame:
    """
    One comparison row per (cell, benchmark, mode)

    Rows already present in `output_path` are kept and not recomputed; the
    CSV is rewritten atomically after every cell so partial results survive
    interruptions. Each row's seed depends only on (grid seed, row id).
    """
    output_path = Path(output_path)
    existing = pd.read_csv(output_path) if resume and output_path.exists() else pd.DataFrame()
    done = set(existing["row_id"]) if "row_id" in existing else set()
    rows: List[Dict[str, Any]] = existing.to_dict("records") if len(existing) else []
    reps = reps or grid.spec.reps

    for cell in grid.cells():
        todo = [
            (bench, mode, s0)
            for bench in grid.spec.benchmarks
            for mode, s0 in grid.modes()
            if _row_id(cell.cell_id, bench, mode, s0) not in done
        ]
        if not todo:
            logger.debug("cell %s already complete, skipping", cell.cell_id)
            continue
        started = time.perf_counter()
        model = cell.scenario.model
        solution = solve_equilibrium(model)
        fluid = build_intervention_policy("fluid", model, solution)
        for bench, mode, s0 in todo:
            row_id = _row_id(cell.cell_id, bench, mode, s0)
            seed = cell_seed(grid.seed, row_id)
            benchmark = build_intervention_policy(bench, model, solution)
            result = compare_policies(
                cell.scenario,
                fluid,
                benchmark,
                mode=mode,
                n_reps=reps if mode == Mode.FINITE else grid.spec.longrun_reps,
                seed=seed,
                s0=s0,
                horizon=grid.spec.horizon,
                jobs=jobs,
            )
            row = result.to_row(scenario_id=cell.cell_id)
            row.update({f"param_{k}": v for k, v in cell.params.items()})
            row["row_id"] = row_id
            rows.append(row)
        write_frame_atomic(pd.DataFrame(rows), output_path)
        logger.info("cell %s done in %.1fs", cell.cell_id, time.perf_counter() - started)

    return pd.DataFrame(rows)


def run_time_varying_study(
    grid: ExperimentGrid,
    output_path: Optional[Union[str, Path]] = None,
    warmup: Optional[float] = None,
    n_batches: Optional[int] = None,
    batch_length: Optional[float] = None,
) -> pd.DataFrame:
    """
    Sinusoidal arrival sweep over amplitudes k and periods f

    The fluid policy is synthesized once from the average arrival rate and
    applied unchanged to every (k, f) cell. Each row reports the fluid
    policy's mean applied return probability and its long-run reduction
    against each benchmark.
    """
    model = grid.base.model
    solution = solve_equilibrium(model)
    fluid_policy = build_policy(model, solution)
    policies = {"fluid": build_intervention_policy("fluid", model, solution, fluid_policy)}
    for bench in grid.spec.benchmarks:
        policies[bench] = build_intervention_policy(bench, model, solution)

    rows = []
    for k, f in product(grid.spec.ks or [0.0], grid.spec.fs or [1.0]):
        scenario = grid.base.with_arrivals(ArrivalSpec(type="sinusoidal", k=k, f=f))
        cell_id = f"{grid.name}:k={k:g}:f={f:g}"
        estimates = {
            name: estimate_longrun(
                scenario, policy, warmup, n_batches, batch_length, seed=cell_seed(grid.seed, f"{cell_id}:{name}")
            )
            for name, policy in policies.items()
        }
        fluid = estimates["fluid"]
        usage = intervention_summary([fluid.run])
        row: Dict[str, Any] = {
            "k": k,
            "f": f,
            "mean_applied_p": usage["mean_applied_p"],
            "busy_fraction": usage["busy_fraction"],
            "cost_rate": fluid.mean,
        }
        for bench in grid.spec.benchmarks:
            other = estimates[bench]
            row[f"{bench}_cost_rate"] = other.mean
            row[f"rel_red_{bench}"] = 1.0 - fluid.mean / other.mean if other.mean else float("nan")
            try:
                ratio = fieller_ci(fluid.batch_rates, other.batch_rates)
                row[f"ci_lo_{bench}"], row[f"ci_hi_{bench}"] = 1.0 - ratio.upper, 1.0 - ratio.lower
            except UnboundedIntervalError:
                row[f"ci_lo_{bench}"] = row[f"ci_hi_{bench}"] = float("nan")
        rows.append(row)
        logger.info("time-varying cell %s: mean applied p %.4f", cell_id, row["mean_applied_p"])

    frame = pd.DataFrame(rows)
    if output_path is not None:
        write_frame_atomic(frame, output_path)
    return frame


def dominance_check(table: pd.DataFrame) -> pd.DataFrame:
    """
    Cells and modes where the fluid policy is significantly worse than
    every benchmark (reduction CI entirely below zero); empty when none
    """
    if table.empty:
        return table
    keys = ["scenario_id", "mode", "s0_x", "s0_y"]
    frame = table.copy()
    frame["worse"] = frame["ci_hi"] < 0
    grouped = frame.fillna({"s0_x": -1, "s0_y": -1}).groupby(keys, dropna=False)["worse"].all()
    violations = grouped[grouped].reset_index()[keys]
    if len(violations):
        logger.warning("fluid policy dominated in %d cell/mode combinations", len(violations))
    return violations


def format_summary(table: pd.DataFrame) -> str:
    """Plain-text table of the headline columns"""
    cols = [c for c in ("scenario_id", "benchmark", "mode", "s0_x", "s0_y", "rel_red", "ci_lo", "ci_hi") if c in table]
    view = table[cols].copy()
    for c in ("rel_red", "ci_lo", "ci_hi"):
        if c in view:
            view[c] = (100.0 * view[c]).round(2)
    return tabulate(view, headers="keys", tablefmt="github", showindex=False)
