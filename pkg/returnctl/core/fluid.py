"""
Deterministic fluid approximation of the queue: dynamics, region partition,
equilibria and trajectories
"""
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Optional, Tuple, Union
import logging
import math

import numpy as np
import pandas as pd

from returnctl.config import settings
from returnctl.core.errors import NonFiniteStateError, OutOfDomainError, UnstableProbabilityError
from returnctl.core.model import DOMAIN_TOLERANCE, QueueModel
from returnctl.utils.ode import rk4_step_scalar

logger = logging.getLogger(__name__)

# (x, y, t) -> return probability
StatePolicy = Callable[[float, float, float], float]
RateFunction = Callable[[float], float]


@dataclass(frozen=True)
class FluidState:
    """Fluid mass of Needy (x) and Content (y) customers"""
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise NonFiniteStateError(f"non-finite fluid state ({self.x}, {self.y})")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"fluid state must be non-negative, got ({self.x}, {self.y})")

    def as_tuple(self) -> Tuple[float, float]:
        return (self.x, self.y)


class Region(str, Enum):
    """State-space partition"""
    C = "C"  # congested: x > N
    A = "A"  # absorbing corner: x <= N, y <= (mu N - lambda) / nu
    N = "N"  # empty queue, large orbit


@dataclass
class FluidTrajectory:
    """
    Sampled fluid path

    `cost` is the running cost accumulated from t = 0 (same length as times).
    `p[k]` is the probability applied on the step starting at times[k]; the
    last entry repeats the policy value at the final state.
    """
    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    cost: np.ndarray

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final_state(self) -> FluidState:
        return FluidState(float(self.x[-1]), float(self.y[-1]))

    @property
    def total_cost(self) -> float:
        return float(self.cost[-1])

    def time_to_region(self, model: QueueModel, region: Region) -> Optional[float]:
        """First sample time at which the path lies in `region` (None if never)"""
        labels = classify(model, self.x, self.y)
        hits = np.flatnonzero(labels == region.value)
        return float(self.times[hits[0]]) if hits.size else None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.times, "x": self.x, "y": self.y, "p": self.p, "cost": self.cost})

    def to_csv(self, path: Union[str, Path]) -> Path:
        from returnctl.utils.file_storage import write_frame_atomic
        return write_frame_atomic(self.to_frame()[["t", "x", "y", "p"]], path)


def classify(model: QueueModel, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Vectorised region labels ('C', 'A', 'N') with the A boundary closed"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.where(x > model.n, Region.C.value,
                    np.where(y <= model.orbit_threshold, Region.A.value, Region.N.value))


class FluidModel:
    """Fluid dynamics of a validated QueueModel"""

    def __init__(self, model: QueueModel):
        self.model = model

    def fluid_rhs(
        self, s: FluidState, p: float, lambda_t: Optional[float] = None
    ) -> Tuple[float, float]:
        """
        Time derivative of (x, y) under return probability p

        Args:
            s: Current state
            p: Return probability in [p_l, p_u]
            lambda_t: Arrival rate at the current time (defaults to lambda_bar)

        Returns:
            (dx/dt, dy/dt)
        """
        m = self.model
        lam = m.lam if lambda_t is None else lambda_t
        busy = min(s.x, m.n)
        return (lam + m.nu * s.y - m.mu * busy, -m.nu * s.y + m.mu * p * busy)

    def cost_rate(self, s: FluidState, p: float) -> float:
        """Running cost h (x - N)+ + r nu y + C(p) mu min(x, N)"""
        m = self.model
        busy = min(s.x, m.n)
        return m.h * max(s.x - m.n, 0.0) + m.r * m.nu * s.y + m.cost.value(p) * m.mu * busy

    def equilibrium_point(self, p: float) -> FluidState:
        """Globally stable fixed point under a constant return probability p"""
        m = self.model
        if not (0 <= p < m.system.max_stable_probability):
            raise UnstableProbabilityError(
                f"p={p} has no stable equilibrium (need p < {m.system.max_stable_probability:.6g})"
            )
        return FluidState(m.lam / (m.mu * (1.0 - p)), m.lam * p / (m.nu * (1.0 - p)))

    def region_of(self, s: FluidState) -> Region:
        if s.x > self.model.n:
            return Region.C
        if s.y <= self.model.orbit_threshold:
            return Region.A
        return Region.N

    def entry_time_bound(self, s0: FluidState) -> float:
        """Upper bound on the time to reach region A under constant p_u"""
        m = self.model
        threshold = m.orbit_threshold
        capacity = m.mu * m.n
        t1 = 0.0
        if s0.y > threshold:
            y_bar = capacity * m.p_u / m.nu
            t1 = math.log((s0.y - y_bar) / (threshold - y_bar)) / m.nu
        drain = capacity * (1.0 - m.p_u) - m.lam
        return t1 + (s0.x + s0.y + m.lam * t1) / drain + 1.0

    def integrate(
        self,
        s0: FluidState,
        policy: Union[StatePolicy, float],
        horizon: float,
        dt: Optional[float] = None,
        arrival_rate: Optional[RateFunction] = None,
    ) -> FluidTrajectory:
        """
        Fixed-step RK4 integration of the fluid dynamics

        The policy is evaluated once per step and held constant over it;
        the running cost is integrated alongside the state. Masses are
        clamped at zero after each step.

        Args:
            s0: Initial state
            policy: Callable (x, y, t) -> p, or a constant probability
            horizon: Final time T > 0
            dt: Step length (defaults to settings.fluid_dt); the step is
                shortened slightly when T is not a multiple of dt
            arrival_rate: Optional time-varying arrival rate lambda(t)

        Returns:
            FluidTrajectory sampled at every step

        Raises:
            NonFiniteStateError: If the state becomes NaN or infinite
            OutOfDomainError: If the policy leaves [p_l, p_u]
        """
        dt = settings.fluid_dt if dt is None else dt
        if horizon <= 0 or dt <= 0:
            raise ValueError(f"horizon and dt must be positive, got T={horizon}, dt={dt}")

        m = self.model
        lam_bar, mu, nu, n, h, r = m.lam, m.mu, m.nu, float(m.n), m.h, m.r
        cost_fn = m.cost
        p_l, p_u = m.p_l, m.p_u
        constant = None if callable(policy) else float(policy)

        steps = max(1, int(math.ceil(horizon / dt - 1e-9)))
        step = horizon / steps
        times = np.linspace(0.0, horizon, steps + 1)
        xs = np.empty(steps + 1)
        ys = np.empty(steps + 1)
        ps = np.empty(steps + 1)
        costs = np.empty(steps + 1)

        def choose(x: float, y: float, t: float) -> float:
            p = constant if constant is not None else float(policy(x, y, t))
            if not (p_l - DOMAIN_TOLERANCE <= p <= p_u + DOMAIN_TOLERANCE):
                raise OutOfDomainError(f"policy returned p={p} at ({x:.4g}, {y:.4g}, t={t:.4g})")
            return min(max(p, p_l), p_u)

        x, y, c = s0.x, s0.y, 0.0
        for k in range(steps):
            t = times[k]
            p = choose(x, y, t)
            cp = cost_fn.value(p)
            xs[k], ys[k], ps[k], costs[k] = x, y, p, c

            def rhs(tt, z, p=p, cp=cp):
                lam = lam_bar if arrival_rate is None else arrival_rate(tt)
                busy = z[0] if z[0] < n else n
                over = z[0] - n if z[0] > n else 0.0
                return (
                    lam + nu * z[1] - mu * busy,
                    -nu * z[1] + mu * p * busy,
                    h * over + r * nu * z[1] + cp * mu * busy,
                )

            x, y, c = rk4_step_scalar(rhs, t, (x, y, c), step)
            if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(c)):
                raise NonFiniteStateError(f"fluid state diverged at t={t + step:.4g}")
            x = max(x, 0.0)
            y = max(y, 0.0)

        xs[-1], ys[-1], costs[-1] = x, y, c
        ps[-1] = choose(x, y, float(times[-1]))
        return FluidTrajectory(times=times, x=xs, y=ys, p=ps, cost=costs)
