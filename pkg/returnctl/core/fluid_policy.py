"""
Composite state-feedback fluid policy
"""
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple
import logging
import time

import numpy as np
import pandas as pd

from returnctl.core.equilibrium import EquilibriumSolution, solve_equilibrium
from returnctl.core.fluid import Region
from returnctl.core.model import QueueModel
from returnctl.core.policy_contours import (
    ContourTable,
    GridSpacing,
    build_contour_table,
    contour_line,
)
from returnctl.core.policy_shooting import ShootingGrid, build_shooting_grid

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PolicyDecision:
    p: float
    region: Region
    tau: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"p": self.p, "region": self.region.value}
        if self.tau is not None:
            data["tau"] = self.tau
        return data


class FluidPolicy:
    """
    Maps a state (x, y) to a return probability

    Region A gets p_inf, region C the p* of the contour line through the
    state, region N the value read from the backward-shot costate lattice.
    Outside A the policy never exceeds p_inf. Without a holding cost the
    policy is p_inf everywhere.
    """

    def __init__(
        self,
        model: QueueModel,
        solution: EquilibriumSolution,
        table: Optional[ContourTable] = None,
        grid: Optional[ShootingGrid] = None,
        build_seconds: float = 0.0,
    ):
        self.model = model
        self.solution = solution
        self.table = table
        self.grid = grid
        self.build_seconds = build_seconds

    @property
    def p_inf(self) -> float:
        return self.solution.p_inf

    @property
    def constant(self) -> bool:
        return self.table is None

    def _cap(self, p: float) -> float:
        # costates outside A never fall below the equilibrium ones
        return min(max(float(p), self.model.p_l), self.model.p_u, self.p_inf)

    def _region(self, x: float, y: float) -> Region:
        if x > self.model.n:
            return Region.C
        if y <= self.model.orbit_threshold:
            return Region.A
        return Region.N

    def query(self, x: float, y: float) -> float:
        """Return probability at (x, y)"""
        region = self._region(x, y)
        if self.constant or region == Region.A:
            return self.p_inf
        if region == Region.N:
            return self._cap(self.grid.query(x, y))
        lo, hi = self.table.bracket(x, y)
        p_lo = self.table.p_star_at(lo)
        if p_lo == self.table.p_star_at(hi):
            return self._cap(p_lo)
        tau = self.table.refine(x, y, lo, hi)
        return self._cap(contour_line(self.model, self.solution, tau).p_star)

    def __call__(self, x: float, y: float, t: float = 0.0) -> float:
        return self.query(x, y)

    def query_details(self, x: float, y: float) -> PolicyDecision:
        """Probability, region and (in region C) the clearing time tau"""
        region = self._region(x, y)
        if region != Region.C or self.constant:
            return PolicyDecision(self.query(x, y), region)
        lo, hi = self.table.bracket(x, y)
        tau = self.table.refine(x, y, lo, hi)
        p = contour_line(self.model, self.solution, tau).p_star
        return PolicyDecision(self._cap(p), region, tau)

    def raster(
        self, x_range: Tuple[float, float], y_range: Tuple[float, float], step: float
    ) -> pd.DataFrame:
        """Policy on a rectangular grid, endpoints included, as columns x, y, p"""
        if step <= 0:
            raise ValueError("step must be positive")
        xs = _axis(x_range, step)
        ys = _axis(y_range, step)
        rows = [(x, y, self.query(x, y)) for x in xs for y in ys]
        return pd.DataFrame(rows, columns=["x", "y", "p"])

    def summary(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "p_inf": self.p_inf,
            "constant": self.constant,
            "build_seconds": round(self.build_seconds, 3),
        }
        if self.table is not None:
            data["contours"] = self.table.summary()
        if self.grid is not None:
            data["shots"] = len(self.grid.shots)
            data["samples"] = len(self.grid)
            data["region_n_p_min"] = float(self.grid.p.min()) if len(self.grid) else None
        return data


def _axis(bounds: Tuple[float, float], step: float) -> np.ndarray:
    lo, hi = bounds
    if hi < lo:
        raise ValueError(f"empty range {bounds}")
    count = int(round((hi - lo) / step)) + 1
    return lo + step * np.arange(count)


def build_policy(
    model: QueueModel,
    solution: Optional[EquilibriumSolution] = None,
    tau_max: Optional[float] = None,
    n_lines: Optional[int] = None,
    spacing: GridSpacing = GridSpacing.REFINED,
    n_anchors: Optional[int] = None,
    backward_horizon: Optional[float] = None,
) -> FluidPolicy:
    """
    Synthesize the fluid policy of a validated model

    Raises:
        FanOutViolationError: If the contour table is inconsistent
        NonFiniteStateError: If backward shooting diverges
    """
    started = time.perf_counter()
    solution = solve_equilibrium(model) if solution is None else solution
    if model.h == 0:
        logger.info("zero holding cost, policy is constant p_inf=%.6g", solution.p_inf)
        return FluidPolicy(model, solution, build_seconds=time.perf_counter() - started)
    table = build_contour_table(model, solution, tau_max, n_lines, spacing)
    grid = build_shooting_grid(model, solution, n_anchors, backward_horizon, table=table)
    return FluidPolicy(model, solution, table, grid, build_seconds=time.perf_counter() - started)
