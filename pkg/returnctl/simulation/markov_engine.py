"""
Markovian engine: exponential service and return times simulated with
aggregate competing rates
"""
import numpy as np

from returnctl.core.scenario import Scenario
from returnctl.simulation.base import BaseEngine, DecisionState
from returnctl.simulation.policies import InterventionPolicy


class MarkovianEngine(BaseEngine):
    """
    Jumps at total rate bound + mu min(X, N) + nu Y

    Arrival proposals at the bounding rate are thinned to the time-varying
    arrival rate, so the engine is exact for non-stationary arrivals too.
    """

    def __init__(
        self,
        scenario: Scenario,
        policy: InterventionPolicy,
        decision_state: DecisionState = DecisionState.POST,
    ):
        if not scenario.exponential:
            raise ValueError("the Markovian engine needs exponential service and return times")
        super().__init__(scenario, policy, decision_state)

    @property
    def engine_name(self) -> str:
        return "markovian"

    def _simulate(self, horizon: float, rng: np.random.Generator) -> None:
        arrivals = self.arrivals
        bound = arrivals.bound
        stationary = arrivals.stationary
        # exponential rates may be overridden by the scenario's duration means
        mu = 1.0 / self.scenario.service_dist.mean if self.scenario.service_dist.mean else self.model.mu
        nu = 1.0 / self.scenario.return_dist.mean if self.scenario.return_dist.mean else self.model.nu
        n = self.model.n

        t = 0.0
        while True:
            service_rate = mu * (self.X if self.X < n else n)
            return_rate = nu * self.Y
            total = bound + service_rate + return_rate
            t += rng.exponential(1.0 / total)
            if t > horizon:
                break
            u = rng.random() * total
            if u < bound:
                if stationary or rng.random() * bound <= arrivals.rate(t):
                    self._on_arrival(t)
            elif u < bound + service_rate:
                self._on_completion(t, rng)
            else:
                self._on_return(t)
