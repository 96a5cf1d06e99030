"""
Long-run average cost of constant return probabilities, its minimizer and
the equilibrium terminal cost
"""
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple
import logging

import numpy as np

from returnctl.core.fluid import FluidModel, FluidState
from returnctl.core.model import ArrayLike, QueueModel, _like

logger = logging.getLogger(__name__)

BISECTION_TOLERANCE = 1e-10


@dataclass(frozen=True)
class EquilibriumSolution:
    """Optimal constant policy and the marginal costs it induces"""
    p_inf: float
    J_inf: float
    x_inf: float
    y_inf: float
    psi_x: float
    psi_y: float
    minimizer_interval: Optional[Tuple[float, float]] = None

    def terminal_cost(self, s: FluidState) -> float:
        return self.psi_x * s.x + self.psi_y * s.y

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "p_inf": self.p_inf,
            "J_inf": self.J_inf,
            "x_inf": self.x_inf,
            "y_inf": self.y_inf,
            "psi_x": self.psi_x,
            "psi_y": self.psi_y,
        }
        if self.minimizer_interval is not None:
            data["minimizer_interval"] = list(self.minimizer_interval)
        return data


def equilibrium_cost(model: QueueModel, p: ArrayLike) -> ArrayLike:
    """
    Long-run average cost rate J(p) = lambda (r p + C(p)) / (1 - p)

    Raises:
        OutOfDomainError: If p lies outside [p_l, p_u]
    """
    c = np.asarray(model.cost.value(p))
    arr = np.asarray(p, dtype=float)
    return _like(model.lam * (model.r * arr + c) / (1.0 - arr), p)


def _segment_minimizer(model: QueueModel) -> Tuple[float, Optional[Tuple[float, float]]]:
    """
    Minimizer for costs that are linear between knots

    q is constant on each segment and non-decreasing across segments, so
    the sign change happens either at a knot or on a flat (q = 0) run of
    segments.
    """
    ps = np.asarray(model.cost.breakpoints, dtype=float)
    cs = np.asarray(model.cost.value(ps), dtype=float)
    slopes = np.diff(cs) / np.diff(ps)
    q = slopes * (1.0 - ps[:-1]) + cs[:-1] + model.r
    zero_tol = 1e-12 * max(1.0, model.r, float(np.max(np.abs(slopes))))

    nonneg = np.flatnonzero(q >= -zero_tol)
    if nonneg.size == 0:
        return float(ps[-1]), None
    j = int(nonneg[0])
    if abs(q[j]) > zero_tol:
        return float(ps[j]), None

    end = j
    while end + 1 < len(q) and abs(q[end + 1]) <= zero_tol:
        end += 1
    interval = (float(ps[j]), float(ps[end + 1]))
    logger.debug("equilibrium cost is flat on %s", interval)
    return 0.5 * (interval[0] + interval[1]), interval


def _smooth_minimizer(model: QueueModel) -> Tuple[float, Optional[Tuple[float, float]]]:
    def q(p: float) -> float:
        lo, _ = model.cost.q_bounds(p, model.r)
        return float(lo)

    p_l, p_u = model.p_l, model.p_u
    q_l, q_u = q(p_l), q(p_u)
    if q_l == 0.0 and q_u == 0.0:
        return 0.5 * (p_l + p_u), (p_l, p_u)
    if q_l >= 0:
        return p_l, None
    if q_u <= 0:
        return p_u, None

    lo, hi = p_l, p_u
    while hi - lo > BISECTION_TOLERANCE:
        mid = 0.5 * (lo + hi)
        if q(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), None


def solve_equilibrium(model: QueueModel) -> EquilibriumSolution:
    """
    Minimize J(p) over [p_l, p_u]

    Uses the sign of q(p) = (1 - p) C'(p) + C(p) + r, which matches the sign
    of J'(p): p_l when q(p_l) >= 0, p_u when q(p_u) <= 0, otherwise the
    root of q. When J is flat on an interval its midpoint is returned and
    the interval recorded.

    Returns:
        EquilibriumSolution with the terminal-cost coefficients psi_x, psi_y
    """
    if model.cost.breakpoints is not None:
        p_inf, interval = _segment_minimizer(model)
    else:
        p_inf, interval = _smooth_minimizer(model)

    c_inf = float(model.cost.value(p_inf))
    psi_x = (model.r * p_inf + c_inf) / (1.0 - p_inf)
    psi_y = (model.r + c_inf) / (1.0 - p_inf)
    fixed = FluidModel(model).equilibrium_point(p_inf)
    solution = EquilibriumSolution(
        p_inf=p_inf,
        J_inf=model.lam * psi_x,
        x_inf=fixed.x,
        y_inf=fixed.y,
        psi_x=psi_x,
        psi_y=psi_y,
        minimizer_interval=interval,
    )
    logger.debug("equilibrium solution %s", solution.to_dict())
    return solution


def terminal_cost(solution: EquilibriumSolution, s: FluidState) -> float:
    """Psi(x, y) = psi_x x + psi_y y"""
    return solution.terminal_cost(s)


def grid_minimum(model: QueueModel, n_points: int = 10001) -> Tuple[float, float]:
    """Brute-force minimum of J on a uniform grid, returned as (p, J)"""
    grid = np.linspace(model.p_l, model.p_u, n_points)
    values = equilibrium_cost(model, grid)
    k = int(np.argmin(values))
    return float(grid[k]), float(values[k])
