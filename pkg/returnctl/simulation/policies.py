"""
Intervention policies applied at service completions
"""
from abc import ABC, abstractmethod
from typing import Dict, Optional, Tuple

from returnctl.core.equilibrium import EquilibriumSolution, solve_equilibrium
from returnctl.core.fluid_policy import FluidPolicy, build_policy
from returnctl.core.model import QueueModel


class InterventionPolicy(ABC):
    """Chooses the return probability from the integer state (X, Y)"""

    name: str = "policy"

    @abstractmethod
    def decide(self, x: int, y: int, t: float) -> float:
        pass

    def __call__(self, x: float, y: float, t: float = 0.0) -> float:
        return self.decide(x, y, t)


class ConstantPolicy(InterventionPolicy):
    name = "constant"

    def __init__(self, p: float):
        self.p = float(p)

    def decide(self, x: int, y: int, t: float) -> float:
        return self.p


class EquilibriumPolicy(ConstantPolicy):
    """p_inf at every decision"""
    name = "equilibrium"


class SimplePolicy(InterventionPolicy):
    """p_l while customers are waiting (X > N), p_inf otherwise"""
    name = "simple"

    def __init__(self, p_inf: float, p_l: float, n_servers: int):
        self.p_inf = float(p_inf)
        self.p_l = float(p_l)
        self.n_servers = n_servers

    def decide(self, x: int, y: int, t: float) -> float:
        return self.p_l if x > self.n_servers else self.p_inf


class FluidInterventionPolicy(InterventionPolicy):
    """Fluid policy evaluated at the integer state, memoised per state"""
    name = "fluid"

    def __init__(self, policy: FluidPolicy):
        self.policy = policy
        self._cache: Dict[Tuple[int, int], float] = {}

    def decide(self, x: int, y: int, t: float) -> float:
        key = (x, y)
        p = self._cache.get(key)
        if p is None:
            p = self.policy.query(float(x), float(y))
            self._cache[key] = p
        return p

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_cache"] = {}
        return state


def build_intervention_policy(
    kind: str,
    model: QueueModel,
    solution: Optional[EquilibriumSolution] = None,
    fluid_policy: Optional[FluidPolicy] = None,
) -> InterventionPolicy:
    """
    Policy by name: 'fluid', 'equilibrium' or 'simple'

    The fluid policy is synthesized unless one is passed in.
    """
    solution = solution or (fluid_policy.solution if fluid_policy else solve_equilibrium(model))
    if kind == "equilibrium":
        return EquilibriumPolicy(solution.p_inf)
    if kind == "simple":
        return SimplePolicy(solution.p_inf, model.p_l, model.n)
    if kind == "fluid":
        return FluidInterventionPolicy(fluid_policy or build_policy(model, solution))
    raise ValueError(f"unknown policy '{kind}' (expected fluid, equilibrium or simple)")
