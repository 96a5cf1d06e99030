"""
Cost accounting and run results
"""
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd


@dataclass
class CostLedger:
    """
    Costs and counters accumulated over [record_from, clock]

    Holding cost h (X - N)+ is piecewise constant between events and is
    integrated exactly by `advance`. Optional checkpoints store cumulative
    totals at record_from + k * checkpoint_every.
    """
    h: float
    r: float
    n_servers: int
    record_from: float = 0.0
    checkpoint_every: Optional[float] = None

    clock: float = 0.0
    holding: float = 0.0
    returns_cost: float = 0.0
    intervention: float = 0.0
    arrivals: int = 0
    completions: int = 0
    returns: int = 0
    interventions: Counter = field(default_factory=Counter)
    sum_p: float = 0.0
    area_x: float = 0.0
    area_y: float = 0.0
    area_queue: float = 0.0
    busy_time: float = 0.0
    checkpoints: List[float] = field(default_factory=list)

    def __post_init__(self):
        self._next_checkpoint = (
            self.record_from + self.checkpoint_every if self.checkpoint_every else float("inf")
        )

    @property
    def total(self) -> float:
        return self.holding + self.returns_cost + self.intervention

    @property
    def direct(self) -> float:
        """Return plus intervention cost"""
        return self.returns_cost + self.intervention

    @property
    def elapsed(self) -> float:
        return max(self.clock - self.record_from, 0.0)

    @property
    def recording(self) -> bool:
        return self.clock >= self.record_from

    def _integrate(self, t_to: float, x: int, y: int) -> None:
        start = max(self.clock, self.record_from)
        if t_to > start:
            dt = t_to - start
            queue = x - self.n_servers if x > self.n_servers else 0
            self.holding += self.h * queue * dt
            self.area_x += x * dt
            self.area_y += y * dt
            self.area_queue += queue * dt
            if x >= self.n_servers:
                self.busy_time += dt
        self.clock = t_to

    def advance(self, t_to: float, x: int, y: int) -> None:
        """Integrate state-dependent quantities up to t_to with the state held at (x, y)"""
        while self._next_checkpoint <= t_to:
            self._integrate(self._next_checkpoint, x, y)
            self.checkpoints.append(self.total)
            self._next_checkpoint = self.record_from + (len(self.checkpoints) + 1) * self.checkpoint_every
        self._integrate(t_to, x, y)

    def record_arrival(self) -> None:
        if self.recording:
            self.arrivals += 1

    def record_completion(self, p: float, cost: float) -> None:
        if self.recording:
            self.completions += 1
            self.intervention += cost
            self.sum_p += p
            self.interventions[p] += 1

    def record_return(self) -> None:
        if self.recording:
            self.returns += 1
            self.returns_cost += self.r

    def batch_totals(self) -> np.ndarray:
        """Cost accumulated in each checkpoint window"""
        return np.diff(np.concatenate([[0.0], self.checkpoints]))

    @property
    def mean_applied_p(self) -> Optional[float]:
        return self.sum_p / self.completions if self.completions else None

    def to_dict(self) -> Dict[str, Any]:
        elapsed = self.elapsed
        return {
            "holding": self.holding,
            "returns_cost": self.returns_cost,
            "intervention": self.intervention,
            "total": self.total,
            "elapsed": elapsed,
            "cost_rate": self.total / elapsed if elapsed else None,
            "arrivals": self.arrivals,
            "completions": self.completions,
            "returns": self.returns,
            "mean_applied_p": self.mean_applied_p,
            "mean_x": self.area_x / elapsed if elapsed else None,
            "mean_y": self.area_y / elapsed if elapsed else None,
            "mean_queue": self.area_queue / elapsed if elapsed else None,
            "busy_fraction": self.busy_time / elapsed if elapsed else None,
            "interventions": {f"{p:.6g}": count for p, count in sorted(self.interventions.items())},
        }


@dataclass
class RunResult:
    """Outcome of one simulated run"""
    ledger: CostLedger
    horizon: float
    s0: Tuple[int, int]
    final_state: Tuple[int, int]
    seed: Optional[Any] = None
    path_times: Optional[np.ndarray] = None
    path_x: Optional[np.ndarray] = None
    path_y: Optional[np.ndarray] = None
    events: Optional[List[Tuple[float, int, int, str]]] = None

    @property
    def total_cost(self) -> float:
        return self.ledger.total

    @property
    def cost_rate(self) -> float:
        return self.ledger.total / self.ledger.elapsed

    def path_frame(self) -> pd.DataFrame:
        if self.path_times is None:
            raise ValueError("run was not sampled on a path grid")
        return pd.DataFrame({"t": self.path_times, "X": self.path_x, "Y": self.path_y})

    def events_frame(self) -> pd.DataFrame:
        if self.events is None:
            raise ValueError("run did not record events")
        return pd.DataFrame(self.events, columns=["t", "X", "Y", "event"])

    def events_to_csv(self, path: Union[str, Path]) -> Path:
        from returnctl.utils.file_storage import write_frame_atomic
        return write_frame_atomic(self.events_frame(), path)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "horizon": self.horizon,
            "s0": list(self.s0),
            "final_state": list(self.final_state),
            "seed": self.seed,
            "ledger": self.ledger.to_dict(),
        }
