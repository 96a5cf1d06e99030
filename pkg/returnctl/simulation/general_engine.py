"""
General engine: per-customer service and return durations on a simpy
event calendar
"""
from typing import Generator

import numpy as np
import simpy

from returnctl.core.scenario import Scenario
from returnctl.simulation.arrivals import sample_nhpp_next
from returnctl.simulation.base import BaseEngine, DecisionState
from returnctl.simulation.distributions import build_duration
from returnctl.simulation.policies import InterventionPolicy


class GeneralEngine(BaseEngine):
    """
    N identical servers (FIFO) and an infinite-server orbit

    Customers present at t = 0 start fresh service and return clocks.
    """

    def __init__(
        self,
        scenario: Scenario,
        policy: InterventionPolicy,
        decision_state: DecisionState = DecisionState.POST,
    ):
        super().__init__(scenario, policy, decision_state)
        self.service = build_duration(scenario.service_dist, scenario.model.mu)
        self.orbit = build_duration(scenario.return_dist, scenario.model.nu)

    @property
    def engine_name(self) -> str:
        return "general"

    def _simulate(self, horizon: float, rng: np.random.Generator) -> None:
        env = simpy.Environment()
        servers = simpy.Resource(env, capacity=self.model.n)

        def needy() -> Generator:
            with servers.request() as request:
                yield request
                yield env.timeout(self.service.sample(rng))
                returning = self._on_completion(env.now, rng)
            if returning:
                env.process(content())

        def content() -> Generator:
            yield env.timeout(self.orbit.sample(rng))
            self._on_return(env.now)
            env.process(needy())

        def arrivals() -> Generator:
            while True:
                t_next = sample_nhpp_next(self.arrivals, env.now, rng)
                yield env.timeout(t_next - env.now)
                self._on_arrival(env.now)
                env.process(needy())

        for _ in range(self.X):
            env.process(needy())
        for _ in range(self.Y):
            env.process(content())
        env.process(arrivals())
        env.run(until=horizon)
