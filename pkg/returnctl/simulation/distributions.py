"""
Service and return duration laws
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
import math

import numpy as np

from returnctl.core.scenario import DurationSpec


class DurationDist(ABC):
    @abstractmethod
    def sample(self, rng: np.random.Generator) -> float:
        """One strictly positive duration"""

    @property
    @abstractmethod
    def mean(self) -> float:
        pass

    @property
    def exponential(self) -> bool:
        return False


@dataclass(frozen=True)
class Exponential(DurationDist):
    rate: float

    def sample(self, rng: np.random.Generator) -> float:
        return rng.exponential(1.0 / self.rate)

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    @property
    def exponential(self) -> bool:
        return True


@dataclass(frozen=True)
class LogNormal(DurationDist):
    """exp(N(log_mean, log_sd^2))"""
    log_mean: float
    log_sd: float

    def sample(self, rng: np.random.Generator) -> float:
        return rng.lognormal(self.log_mean, self.log_sd)

    @property
    def mean(self) -> float:
        return math.exp(self.log_mean + 0.5 * self.log_sd ** 2)


@dataclass(frozen=True)
class TruncatedExponential(DurationDist):
    """
    Exponential with scale `scale` conditioned on falling below `bound`

    Sampled by inversion so every draw consumes exactly one uniform.
    """
    scale: float
    bound: float

    def sample(self, rng: np.random.Generator) -> float:
        u = rng.random()
        x = -self.scale * math.log1p(-u * -math.expm1(-self.bound / self.scale))
        # u = 0 maps to 0; nudge to keep durations strictly positive
        return x if x > 0 else math.ulp(0.0)

    @property
    def mean(self) -> float:
        return self.scale - self.bound / math.expm1(self.bound / self.scale)


def build_duration(spec: DurationSpec, default_rate: float) -> DurationDist:
    """Duration law from a scenario section; exponential falls back to the model rate"""
    if spec.type == "exponential":
        return Exponential(1.0 / spec.mean if spec.mean is not None else default_rate)
    if spec.type == "lognormal":
        return LogNormal(spec.log_mean, spec.log_sd)
    return TruncatedExponential(spec.scale, spec.bound)
