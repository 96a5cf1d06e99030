"""
Abstract base class for simulation engines
Defines the shared state, cost accounting and decision-epoch logic
"""
from abc import ABC, abstractmethod
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from returnctl.core.scenario import Scenario
from returnctl.simulation.arrivals import ArrivalProcess, build_arrival_process
from returnctl.simulation.ledger import CostLedger, RunResult
from returnctl.simulation.policies import InterventionPolicy


class EngineKind(str, Enum):
    AUTO = "auto"
    MARKOVIAN = "markovian"
    GENERAL = "general"


class DecisionState(str, Enum):
    """State handed to the policy at a service completion"""
    POST = "post"  # departing customer already removed from X
    PRE = "pre"


class BaseEngine(ABC):
    """
    Event-driven simulation of the queue with returns

    Subclasses drive the clock; this class owns the state (X, Y), the cost
    ledger, the sampled path and the optional event log.
    """

    def __init__(
        self,
        scenario: Scenario,
        policy: InterventionPolicy,
        decision_state: DecisionState = DecisionState.POST,
    ):
        self.scenario = scenario
        self.model = scenario.model
        self.policy = policy
        self.decision_state = DecisionState(decision_state)
        self.arrivals: ArrivalProcess = build_arrival_process(scenario.arrivals, scenario.model)
        self._cost_cache: Dict[float, float] = {}

    @property
    @abstractmethod
    def engine_name(self) -> str:
        pass

    @abstractmethod
    def _simulate(self, horizon: float, rng: np.random.Generator) -> None:
        """Advance the state from t = 0 to `horizon`, calling the event hooks"""

    def run(
        self,
        s0: Tuple[int, int],
        horizon: float,
        rng: np.random.Generator,
        record_from: float = 0.0,
        checkpoint_every: Optional[float] = None,
        path_grid: Optional[Sequence[float]] = None,
        record_events: bool = False,
        seed: Optional[object] = None,
    ) -> RunResult:
        """
        Simulate one run

        Args:
            s0: Initial (X, Y)
            horizon: End time
            rng: Random stream, consumed deterministically
            record_from: Costs and counters before this time are discarded (warm-up)
            checkpoint_every: Store cumulative cost every this many days after record_from
            path_grid: Times at which to sample (X, Y)
            record_events: Keep an (t, X, Y, event) log

        Returns:
            RunResult for the run
        """
        if horizon <= 0:
            raise ValueError("horizon must be positive")
        x0, y0 = int(s0[0]), int(s0[1])
        if x0 < 0 or y0 < 0:
            raise ValueError(f"initial state must be non-negative, got {s0}")

        self.X, self.Y = x0, y0
        self.ledger = CostLedger(
            h=self.model.h,
            r=self.model.r,
            n_servers=self.model.n,
            record_from=record_from,
            checkpoint_every=checkpoint_every,
        )
        self._grid = None if path_grid is None else np.asarray(path_grid, dtype=float)
        self._grid_x: List[int] = []
        self._grid_y: List[int] = []
        self._events: Optional[List[Tuple[float, int, int, str]]] = [] if record_events else None
        if self._events is not None:
            self._events.append((0.0, x0, y0, "start"))

        self._simulate(horizon, rng)
        self._advance(horizon)
        if self._grid is not None:
            while len(self._grid_x) < len(self._grid):
                self._grid_x.append(self.X)
                self._grid_y.append(self.Y)

        return RunResult(
            ledger=self.ledger,
            horizon=horizon,
            s0=(x0, y0),
            final_state=(self.X, self.Y),
            seed=seed,
            path_times=self._grid,
            path_x=None if self._grid is None else np.asarray(self._grid_x),
            path_y=None if self._grid is None else np.asarray(self._grid_y),
            events=self._events,
        )

    # Event hooks shared by the engines

    def _advance(self, t: float) -> None:
        if self._grid is not None:
            k = len(self._grid_x)
            while k < len(self._grid) and self._grid[k] < t:
                self._grid_x.append(self.X)
                self._grid_y.append(self.Y)
                k += 1
        self.ledger.advance(t, self.X, self.Y)

    def _log(self, t: float, event: str) -> None:
        if self._events is not None:
            self._events.append((t, self.X, self.Y, event))

    def _intervention_cost(self, p: float) -> float:
        cost = self._cost_cache.get(p)
        if cost is None:
            cost = float(self.model.cost.value(p))
            self._cost_cache[p] = cost
        return cost

    def _on_arrival(self, t: float) -> None:
        self._advance(t)
        self.X += 1
        self.ledger.record_arrival()
        self._log(t, "arrival")

    def _on_completion(self, t: float, rng: np.random.Generator) -> bool:
        """Service completion; returns True if the customer will return"""
        self._advance(t)
        self.X -= 1
        x_seen = self.X if self.decision_state == DecisionState.POST else self.X + 1
        p = self.policy.decide(x_seen, self.Y, t)
        self.ledger.record_completion(p, self._intervention_cost(p))
        returning = rng.random() < p
        if returning:
            self.Y += 1
        self._log(t, "completion_return" if returning else "departure")
        return returning

    def _on_return(self, t: float) -> None:
        self._advance(t)
        self.Y -= 1
        self.X += 1
        self.ledger.record_return()
        self._log(t, "return")
