"""
Policy comparisons with confidence intervals on the relative cost reduction
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple
import logging

import numpy as np

from returnctl.config import settings
from returnctl.core.errors import UnboundedIntervalError
from returnctl.core.scenario import Scenario
from returnctl.experiments.statistics import Interval, bootstrap_ratio_ci, fieller_ci
from returnctl.simulation.policies import InterventionPolicy
from returnctl.simulation.runner import estimate_longrun, run_replications
from returnctl.utils.seeding import cell_seed

logger = logging.getLogger(__name__)


class Mode(str, Enum):
    FINITE = "finite"
    LONGRUN = "longrun"


@dataclass
class ComparisonResult:
    """
    Policy A measured against policy B

    rel_reduction = 1 - mean_a / mean_b (positive when A is cheaper);
    ratio_minus_one = mean_a / mean_b - 1 is kept alongside.
    """
    policy_a: str
    policy_b: str
    mode: Mode
    mean_a: float
    mean_b: float
    ratio: Optional[Interval]
    n_reps: int
    seed: Optional[int]
    horizon: Optional[float] = None
    s0: Optional[Tuple[int, int]] = None
    samples_a: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    samples_b: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    @property
    def abs_reduction(self) -> float:
        return self.mean_b - self.mean_a

    @property
    def rel_reduction(self) -> float:
        return 1.0 - self.mean_a / self.mean_b if self.mean_b else float("nan")

    @property
    def ratio_minus_one(self) -> float:
        return -self.rel_reduction

    @property
    def rel_reduction_ci(self) -> Tuple[float, float]:
        """(lower, upper); NaN when the ratio interval is unbounded"""
        if self.ratio is None:
            return (float("nan"), float("nan"))
        return (1.0 - self.ratio.upper, 1.0 - self.ratio.lower)

    @property
    def significant(self) -> bool:
        """CI on the reduction excludes zero"""
        lo, hi = self.rel_reduction_ci
        return bool(lo > 0 or hi < 0)

    def to_row(self, scenario_id: str = "") -> Dict[str, Any]:
        lo, hi = self.rel_reduction_ci
        return {
            "scenario_id": scenario_id,
            "benchmark": self.policy_b,
            "mode": self.mode.value,
            "s0_x": self.s0[0] if self.s0 else None,
            "s0_y": self.s0[1] if self.s0 else None,
            "mean_fluid": self.mean_a,
            "mean_bench": self.mean_b,
            "abs_red": self.abs_reduction,
            "rel_red": self.rel_reduction,
            "ci_lo": lo,
            "ci_hi": hi,
            "ratio_minus_one": self.ratio_minus_one,
            "n_reps": self.n_reps,
            "seed": self.seed,
        }

    def to_dict(self) -> Dict[str, Any]:
        data = self.to_row()
        data["policy"] = self.policy_a
        data["horizon"] = self.horizon
        data["ratio_ci"] = self.ratio.to_dict() if self.ratio else None
        return data


def _samples_finite(
    scenario: Scenario,
    policy: InterventionPolicy,
    s0: Tuple[int, int],
    horizon: float,
    n_reps: int,
    seed: int,
    jobs: Optional[int],
) -> np.ndarray:
    results = run_replications(scenario, policy, s0, horizon, n_reps, seed=seed, jobs=jobs)
    return np.array([r.total_cost for r in results])


def _samples_longrun(
    scenario: Scenario,
    policy: InterventionPolicy,
    n_reps: int,
    seed: int,
    warmup: Optional[float],
    n_batches: Optional[int],
    batch_length: Optional[float],
) -> np.ndarray:
    rates: List[np.ndarray] = []
    for rep in range(n_reps):
        estimate = estimate_longrun(
            scenario, policy, warmup, n_batches, batch_length, seed=cell_seed(seed, f"run{rep}")
        )
        rates.append(estimate.batch_rates)
    return np.concatenate(rates)


def compare_policies(
    scenario: Scenario,
    policy_a: InterventionPolicy,
    policy_b: InterventionPolicy,
    mode: Mode = Mode.FINITE,
    n_reps: Optional[int] = None,
    seed: int = 0,
    s0: Optional[Tuple[int, int]] = None,
    horizon: Optional[float] = None,
    jobs: Optional[int] = None,
    alpha: Optional[float] = None,
    paired: bool = False,
    warmup: Optional[float] = None,
    n_batches: Optional[int] = None,
    batch_length: Optional[float] = None,
) -> ComparisonResult:
    """
    Compare expected costs of two policies

    finite: `n_reps` independent replications per policy over [0, horizon]
    from s0, compared on total cost. longrun: `n_reps` long runs per policy
    (default 1), compared on batch-mean cost rates.

    Independent streams use a Fieller interval; paired (common random
    numbers) runs use a percentile bootstrap.
    """
    mode = Mode(mode)
    alpha = 1.0 - settings.confidence_level if alpha is None else alpha
    seed_a = cell_seed(seed, "a")
    seed_b = seed_a if paired else cell_seed(seed, "b")

    if mode == Mode.FINITE:
        n_reps = n_reps or scenario.simulation.reps or settings.replications
        horizon = horizon or scenario.simulation.horizon or settings.finite_horizon
        s0 = tuple(s0 if s0 is not None else scenario.simulation.s0)
        samples_a = _samples_finite(scenario, policy_a, s0, horizon, n_reps, seed_a, jobs)
        samples_b = _samples_finite(scenario, policy_b, s0, horizon, n_reps, seed_b, jobs)
    else:
        n_reps = n_reps or 1
        samples_a = _samples_longrun(scenario, policy_a, n_reps, seed_a, warmup, n_batches, batch_length)
        samples_b = _samples_longrun(scenario, policy_b, n_reps, seed_b, warmup, n_batches, batch_length)
        s0 = None
        horizon = None

    try:
        if paired:
            ratio = bootstrap_ratio_ci(samples_a, samples_b, alpha, seed=seed)
        else:
            ratio = fieller_ci(samples_a, samples_b, alpha)
    except UnboundedIntervalError as e:
        logger.warning("no bounded interval for %s vs %s: %s", policy_a.name, policy_b.name, e)
        ratio = None

    result = ComparisonResult(
        policy_a=policy_a.name,
        policy_b=policy_b.name,
        mode=mode,
        mean_a=float(samples_a.mean()),
        mean_b=float(samples_b.mean()),
        ratio=ratio,
        n_reps=n_reps,
        seed=seed,
        horizon=horizon,
        s0=s0,
        samples_a=samples_a,
        samples_b=samples_b,
    )
    logger.info(
        "%s vs %s (%s): reduction %.2f%%", result.policy_a, result.policy_b, mode.value,
        100.0 * result.rel_reduction,
    )
    return result
