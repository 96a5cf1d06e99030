"""
Arrival processes: homogeneous Poisson and time-varying (thinning)
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
import math

import numpy as np

from returnctl.core.model import QueueModel
from returnctl.core.scenario import ArrivalSpec

TWO_PI = 2.0 * math.pi


class ArrivalProcess(ABC):
    """Poisson arrivals with a bounded rate function"""

    @abstractmethod
    def rate(self, t: float) -> float:
        """Instantaneous arrival rate at time t"""

    @property
    @abstractmethod
    def bound(self) -> float:
        """Upper bound on rate(t) used for thinning"""

    @property
    @abstractmethod
    def mean_rate(self) -> float:
        """Long-run average rate"""

    @property
    def stationary(self) -> bool:
        return False


@dataclass(frozen=True)
class StationaryArrivals(ArrivalProcess):
    lam: float

    def rate(self, t: float) -> float:
        return self.lam

    @property
    def bound(self) -> float:
        return self.lam

    @property
    def mean_rate(self) -> float:
        return self.lam

    @property
    def stationary(self) -> bool:
        return True


@dataclass(frozen=True)
class SinusoidalArrivals(ArrivalProcess):
    """lambda(t) = mean (1 + k sin(2 pi t / period))"""
    mean: float
    k: float
    period: float

    def __post_init__(self):
        if not 0 <= self.k <= 1:
            raise ValueError(f"amplitude k must lie in [0, 1], got {self.k}")
        if self.period <= 0:
            raise ValueError("period must be positive")

    def rate(self, t: float) -> float:
        return self.mean * (1.0 + self.k * math.sin(TWO_PI * t / self.period))

    @property
    def bound(self) -> float:
        return self.mean * (1.0 + self.k)

    @property
    def mean_rate(self) -> float:
        return self.mean

    @property
    def stationary(self) -> bool:
        return self.k == 0


@dataclass(frozen=True)
class CaseStudyWeeklyArrivals(ArrivalProcess):
    """
    Weekday/weekend base rate with a within-day cycle

    lambda(t) = base(t) (1 - amplitude sin(2 pi t)), base = weekday_rate on
    the first `weekdays` days of each week.
    """
    weekday_rate: float = 6.14
    weekend_rate: float = 5.32
    amplitude: float = 0.8
    weekdays: int = 5

    def base(self, t: float) -> float:
        return self.weekday_rate if (t % 7.0) < self.weekdays else self.weekend_rate

    def rate(self, t: float) -> float:
        return self.base(t) * (1.0 - self.amplitude * math.sin(TWO_PI * t))

    @property
    def bound(self) -> float:
        return max(self.weekday_rate, self.weekend_rate) * (1.0 + self.amplitude)

    @property
    def mean_rate(self) -> float:
        return (self.weekdays * self.weekday_rate + (7 - self.weekdays) * self.weekend_rate) / 7.0


def sample_nhpp_next(arrivals: ArrivalProcess, now: float, rng: np.random.Generator) -> float:
    """
    Next arrival time after `now`

    Proposals come from a homogeneous process at rate `bound` and are kept
    with probability rate(t) / bound.
    """
    bound = arrivals.bound
    t = now
    if arrivals.stationary:
        return t + rng.exponential(1.0 / bound)
    while True:
        t += rng.exponential(1.0 / bound)
        if rng.random() * bound <= arrivals.rate(t):
            return t


def build_arrival_process(spec: ArrivalSpec, model: QueueModel) -> ArrivalProcess:
    """Arrival process for a scenario; stationary and sinusoidal use the model's lambda"""
    if spec.type == "stationary":
        return StationaryArrivals(model.lam)
    if spec.type == "sinusoidal":
        return SinusoidalArrivals(model.lam, spec.k, spec.f)
    return CaseStudyWeeklyArrivals(spec.weekday_rate, spec.weekend_rate, spec.amplitude, spec.weekdays)
