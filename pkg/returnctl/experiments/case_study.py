"""
Holding-cost sweep: direct cost versus queue length under the fluid policy
"""
from typing import Optional, Sequence
import logging

import numpy as np
import pandas as pd

from returnctl.core.equilibrium import solve_equilibrium
from returnctl.core.errors import UnboundedIntervalError
from returnctl.core.scenario import Scenario
from returnctl.experiments.statistics import fieller_ci
from returnctl.experiments.summaries import intervention_summary
from returnctl.simulation.policies import build_intervention_policy
from returnctl.simulation.runner import estimate_longrun
from returnctl.utils.seeding import cell_seed

logger = logging.getLogger(__name__)

CASE_STUDY_HOLDING_COSTS = (500.0, 1000.0, 1500.0, 2000.0, 2500.0, 3000.0)


def _check_convex(frame: pd.DataFrame) -> bool:
    """Direct cost should be a convex, decreasing function of the mean queue"""
    curve = frame.sort_values("mean_queue")
    q = curve["mean_queue"].to_numpy()
    d = curve["direct_cost_rate"].to_numpy()
    if len(q) < 3 or np.any(np.diff(q) <= 0):
        return True
    slopes = np.diff(d) / np.diff(q)
    convex = bool(np.all(np.diff(slopes) >= 0))
    if not convex:
        logger.warning("tradeoff curve is not convex at slopes %s", np.round(slopes, 3).tolist())
    return convex


def tradeoff_curve(
    scenario: Scenario,
    holding_costs: Sequence[float] = CASE_STUDY_HOLDING_COSTS,
    seed: int = 0,
    warmup: Optional[float] = None,
    n_batches: Optional[int] = None,
    batch_length: Optional[float] = None,
    alpha: float = 0.05,
) -> pd.DataFrame:
    """
    For each holding cost h: synthesize the fluid policy, estimate its
    long-run direct cost (returns plus interventions) per day and mean
    queue, and compare its total cost with the equilibrium policy

    Returns:
        DataFrame with one row per h, sorted by h
    """
    rows = []
    for h in sorted(holding_costs):
        cell = scenario.with_overrides(h=float(h))
        solution = solve_equilibrium(cell.model)
        policies = {
            "fluid": build_intervention_policy("fluid", cell.model, solution),
            "equilibrium": build_intervention_policy("equilibrium", cell.model, solution),
        }
        estimates = {
            name: estimate_longrun(
                cell, policy, warmup, n_batches, batch_length, seed=cell_seed(seed, f"h={h}:{name}")
            )
            for name, policy in policies.items()
        }
        fluid, equilibrium = estimates["fluid"], estimates["equilibrium"]
        try:
            ratio = fieller_ci(fluid.batch_rates, equilibrium.batch_rates, alpha)
            ci_lo, ci_hi = 1.0 - ratio.upper, 1.0 - ratio.lower
        except UnboundedIntervalError:
            ci_lo = ci_hi = float("nan")
        fluid_usage = intervention_summary([fluid.run])
        eq_usage = intervention_summary([equilibrium.run])
        rows.append({
            "h": float(h),
            "direct_cost_rate": fluid_usage["direct_cost_rate"],
            "mean_queue": fluid_usage["mean_queue"],
            "cost_rate": fluid.mean,
            "mean_applied_p": fluid_usage["mean_applied_p"],
            "eq_direct_cost_rate": eq_usage["direct_cost_rate"],
            "eq_mean_queue": eq_usage["mean_queue"],
            "eq_cost_rate": equilibrium.mean,
            "rel_red": 1.0 - fluid.mean / equilibrium.mean if equilibrium.mean else float("nan"),
            "ci_lo": ci_lo,
            "ci_hi": ci_hi,
        })
        logger.info("h=%g: direct %.1f/day, queue %.2f", h, rows[-1]["direct_cost_rate"], rows[-1]["mean_queue"])

    frame = pd.DataFrame(rows)
    _check_convex(frame)
    return frame
