"""
Contour lines of the optimal policy in the congested region

Every congested state that clears its queue in exactly tau time units under
the optimal policy lies on the line x + (1 - e^{-nu tau}) y = a(tau), and
all states on that line share the return probability p*(tau). A table of
such lines over a tau grid turns a policy query into a root search in tau.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple
import logging
import time

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from returnctl.config import settings
from returnctl.core.equilibrium import EquilibriumSolution
from returnctl.core.errors import FanOutViolationError, InvalidScenarioError
from returnctl.core.fluid import FluidState
from returnctl.core.model import CostForm, QueueModel
from returnctl.core.policy_costates import costate_arrays

logger = logging.getLogger(__name__)

MAX_EXTENSIONS = 30


class GridSpacing(str, Enum):
    UNIFORM = "uniform"
    REFINED = "refined"  # quadratic in the index, dense near tau = 0


@dataclass(frozen=True)
class ContourLine:
    """The line x + slope_coeff * y = a carrying return probability p_star"""
    tau: float
    slope_coeff: float
    a: float
    p_star: float
    y_at_capacity: float  # y where the line meets x = N

    def residual(self, x: float, y: float) -> float:
        """Positive beyond the line (longer clearing time), negative before it"""
        return x + self.slope_coeff * y - self.a

    def to_dict(self) -> Dict[str, float]:
        return {
            "tau": self.tau,
            "slope_coeff": self.slope_coeff,
            "a": self.a,
            "p_star": self.p_star,
            "y_at_capacity": self.y_at_capacity,
        }


def contour_arrays(
    model: QueueModel, solution: EquilibriumSolution, taus: np.ndarray
) -> Dict[str, np.ndarray]:
    """
    Vectorised contour coefficients for a grid of clearing times

    Requires h > 0. The intercept is assembled as
    a = N + (mu N - lambda) tau - mu N (Phi - psi_x) / h with
    Phi = min_p C(p) + Gamma2 p, which keeps precision near tau = 0.
    """
    if model.h <= 0:
        raise ValueError("contour lines need a positive holding cost")
    taus = np.asarray(taus, dtype=float)
    n = float(model.n)
    capacity = model.mu * n
    _, g2 = costate_arrays(model, solution, taus)
    g2 = np.asarray(g2, dtype=float)
    p_star = np.asarray(model.cost.argmin_phi(g2), dtype=float)
    phi = np.asarray(model.cost.value(p_star), dtype=float) + g2 * p_star

    slope = -np.expm1(-model.nu * taus)
    offset = (capacity - model.lam) * taus - capacity * (phi - solution.psi_x) / model.h
    at_zero = taus == 0.0
    offset = np.where(at_zero, 0.0, offset)
    p_star = np.where(at_zero, solution.p_inf, p_star)
    with np.errstate(divide="ignore", invalid="ignore"):
        y_cap = np.where(at_zero, model.orbit_threshold, offset / np.where(at_zero, 1.0, slope))
    return {
        "tau": taus,
        "slope_coeff": slope,
        "a": n + offset,
        "p_star": p_star,
        "y_at_capacity": y_cap,
    }


def contour_line(model: QueueModel, solution: EquilibriumSolution, tau: float) -> ContourLine:
    """The contour line for clearing time tau >= 0 (tau = 0 is exactly x = N)"""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    arrays = contour_arrays(model, solution, np.array([float(tau)]))
    return ContourLine(**{key: float(values[0]) for key, values in arrays.items()})


def tau_grid(tau_max: float, n_lines: int, spacing: GridSpacing = GridSpacing.REFINED) -> np.ndarray:
    if tau_max <= 0 or n_lines < 2:
        raise InvalidScenarioError(
            f"need tau_max > 0 and n_lines >= 2, got {tau_max}, {n_lines}", ["tau_max", "n_lines"]
        )
    frac = np.linspace(0.0, 1.0, n_lines)
    if GridSpacing(spacing) == GridSpacing.REFINED:
        frac = frac ** 2
    return tau_max * frac


class ContourTable:
    """
    Contour lines over an increasing tau grid

    Lines are appended (tau_max doubled) by `extend` and `cover_capacity`
    while a policy is built. Lookups only read the table.
    """

    def __init__(
        self,
        model: QueueModel,
        solution: EquilibriumSolution,
        taus: np.ndarray,
        spacing: GridSpacing = GridSpacing.REFINED,
        tolerance: Optional[float] = None,
    ):
        self.model = model
        self.solution = solution
        self.spacing = GridSpacing(spacing)
        self.tolerance = settings.contour_tolerance if tolerance is None else tolerance
        self._set(contour_arrays(model, solution, taus))

    def _set(self, arrays: Dict[str, np.ndarray]) -> None:
        self.taus = arrays["tau"]
        self.slope_coeffs = arrays["slope_coeff"]
        self.intercepts = arrays["a"]
        self.p_stars = arrays["p_star"]
        self.y_at_capacity = arrays["y_at_capacity"]

    def __len__(self) -> int:
        return len(self.taus)

    @property
    def tau_max(self) -> float:
        return float(self.taus[-1])

    @property
    def lines(self) -> List[ContourLine]:
        return [self.line(i) for i in range(len(self))]

    def line(self, i: int) -> ContourLine:
        return ContourLine(
            tau=float(self.taus[i]),
            slope_coeff=float(self.slope_coeffs[i]),
            a=float(self.intercepts[i]),
            p_star=float(self.p_stars[i]),
            y_at_capacity=float(self.y_at_capacity[i]),
        )

    def check_fan_out(self) -> None:
        """
        Raises:
            FanOutViolationError: If slope or capacity intercept fail to
                increase strictly along the table
        """
        for name, values in (("slope_coeff", self.slope_coeffs), ("y_at_capacity", self.y_at_capacity)):
            bad = np.flatnonzero(np.diff(values) <= 0)
            if bad.size:
                i = int(bad[0]) + 1
                raise FanOutViolationError(
                    f"{name} not increasing at tau={self.taus[i]:.6g} "
                    f"({values[i - 1]:.12g} -> {values[i]:.12g})",
                    index=i,
                )

    def extend(self) -> None:
        """Double tau_max, keeping the existing lines"""
        old_max = self.tau_max
        n_new = max(2, len(self) // 2)
        extra = np.linspace(old_max, 2.0 * old_max, n_new + 1)[1:]
        arrays = contour_arrays(self.model, self.solution, extra)
        self.taus = np.concatenate([self.taus, arrays["tau"]])
        self.slope_coeffs = np.concatenate([self.slope_coeffs, arrays["slope_coeff"]])
        self.intercepts = np.concatenate([self.intercepts, arrays["a"]])
        self.p_stars = np.concatenate([self.p_stars, arrays["p_star"]])
        self.y_at_capacity = np.concatenate([self.y_at_capacity, arrays["y_at_capacity"]])
        logger.debug("contour table extended from tau_max=%.4g to %.4g", old_max, self.tau_max)

    def residuals(self, x: float, y: float) -> np.ndarray:
        """x + s_i y - a_i for every line i"""
        return x + self.slope_coeffs * y - self.intercepts

    def bracket(self, x: float, y: float) -> Tuple[float, float]:
        """
        Clearing times (lo, hi) of consecutive lines with the state between them

        States beyond the last line are bracketed by doubling tau past
        tau_max; those lines are evaluated on the fly and not stored, so
        lookups never change the table.
        """
        below = self.residuals(x, y) <= 0.0
        if below.any():
            i = int(np.argmax(below))
            return float(self.taus[max(i - 1, 0)]), float(self.taus[i])
        lo = self.tau_max
        for _ in range(MAX_EXTENSIONS):
            hi = 2.0 * lo
            if contour_line(self.model, self.solution, hi).residual(x, y) <= 0.0:
                logger.debug("state (%.4g, %.4g) beyond tau_max=%.4g, bracketed at %.4g", x, y, self.tau_max, hi)
                return lo, hi
            lo = hi
        raise FanOutViolationError(f"no contour line found beyond ({x}, {y})")

    def p_star_at(self, tau: float) -> float:
        _, g2 = costate_arrays(self.model, self.solution, float(tau))
        return float(self.model.cost.argmin_phi(float(g2))) if tau > 0 else self.solution.p_inf

    def cover_capacity(self, y: float) -> None:
        """
        Append lines until the table crosses x = N above orbit level y

        Only called while a policy is being built.

        Raises:
            FanOutViolationError: If the grown table is inconsistent
        """
        for _ in range(MAX_EXTENSIONS):
            if self.y_at_capacity[-1] >= y:
                self.check_fan_out()
                return
            self.extend()
        raise FanOutViolationError(f"no contour line meets x = N above y = {y}")

    def gamma2_at_capacity(self, y: np.ndarray) -> np.ndarray:
        """Gamma2 of the line through (N, y) for orbit levels y within the table"""
        tau = np.interp(y, self.y_at_capacity, self.taus)
        return np.asarray(costate_arrays(self.model, self.solution, tau)[1], dtype=float)

    def tau_for_state(self, s: FluidState) -> float:
        """
        Clearing time of a congested state

        Brackets the state between two lines and bisects on the closed-form
        line residual to the table tolerance. States with x <= N return 0.
        """
        if s.x <= self.model.n:
            return 0.0
        lo, hi = self.bracket(s.x, s.y)
        return self.refine(s.x, s.y, lo, hi)

    def refine(self, x: float, y: float, lo: float, hi: float) -> float:
        while hi - lo > self.tolerance:
            mid = 0.5 * (lo + hi)
            if contour_line(self.model, self.solution, mid).residual(x, y) > 0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "tau": self.taus,
            "slope_coeff": self.slope_coeffs,
            "a": self.intercepts,
            "p_star": self.p_stars,
            "y_at_capacity": self.y_at_capacity,
        })

    def summary(self) -> Dict[str, Any]:
        return {
            "lines": len(self),
            "tau_max": self.tau_max,
            "spacing": self.spacing.value,
            "p_min": float(self.p_stars.min()),
            "p_max": float(self.p_stars.max()),
        }


def build_contour_table(
    model: QueueModel,
    solution: EquilibriumSolution,
    tau_max: Optional[float] = None,
    n_lines: Optional[int] = None,
    spacing: GridSpacing = GridSpacing.REFINED,
) -> ContourTable:
    """
    Contour lines on a tau grid from 0 to tau_max, fan-out checked

    Raises:
        FanOutViolationError: If two lines would intersect inside region C
    """
    tau_max = settings.contour_tau_max if tau_max is None else tau_max
    n_lines = settings.contour_lines if n_lines is None else n_lines
    started = time.perf_counter()
    table = ContourTable(model, solution, tau_grid(tau_max, n_lines, spacing), spacing=spacing)
    table.check_fan_out()
    logger.info(
        "built %d contour lines to tau=%.4g in %.3fs", len(table), tau_max, time.perf_counter() - started
    )
    return table


def linear_switching_tau(model: QueueModel, solution: EquilibriumSolution) -> float:
    """
    Clearing time at which a linear-cost policy switches from p_u to p_l

    Solves Gamma2(tau) = M / (p_u - p_l). Returns 0 when the equilibrium
    policy is already p_l.
    """
    if model.cost.form != CostForm.LINEAR:
        raise ValueError("switching time is defined for linear costs only")
    if model.h <= 0:
        raise ValueError("no switching without a holding cost")
    threshold = model.cost.slope

    def gap(tau: float) -> float:
        return float(costate_arrays(model, solution, tau)[1]) - threshold

    if gap(0.0) >= 0:
        return 0.0
    hi = 1.0
    while gap(hi) < 0:
        hi *= 2.0
    return float(brentq(gap, 0.0, hi, xtol=1e-12))
