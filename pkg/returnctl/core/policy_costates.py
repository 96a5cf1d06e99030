"""
Costates of the congested region, the pointwise return-probability
minimizer and the Hamiltonian
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from returnctl.core.equilibrium import EquilibriumSolution
from returnctl.core.fluid import FluidState
from returnctl.core.model import ArrayLike, QueueModel, _like


@dataclass(frozen=True)
class Costate:
    """Marginal future cost of one Needy (gamma1) and one Content (gamma2) customer"""
    gamma1: float
    gamma2: float

    def as_tuple(self) -> Tuple[float, float]:
        return (self.gamma1, self.gamma2)


def equilibrium_costate(solution: EquilibriumSolution) -> Costate:
    return Costate(solution.psi_x, solution.psi_y)


def costate_arrays(
    model: QueueModel, solution: EquilibriumSolution, tau: ArrayLike
) -> Tuple[ArrayLike, ArrayLike]:
    """Vectorised (Gamma1(tau), Gamma2(tau)) for tau >= 0 time units before clearing"""
    t = np.asarray(tau, dtype=float)
    if np.any(t < 0):
        raise ValueError("tau must be non-negative")
    nu = model.nu
    g1 = model.h * t + solution.psi_x
    # e^{-nu t} + nu t - 1 suffers cancellation for small nu t
    g2 = (model.h / nu) * (np.expm1(-nu * t) + nu * t) + solution.psi_y
    return _like(g1, tau), _like(g2, tau)


def costates_backward(model: QueueModel, solution: EquilibriumSolution, tau: float) -> Costate:
    """
    Costates tau time units before the queue clears

    Gamma1 grows linearly in tau at rate h; Gamma2 approaches the same
    slope with lag 1/nu. Both equal the equilibrium marginal costs at tau = 0.
    """
    g1, g2 = costate_arrays(model, solution, float(tau))
    return Costate(float(g1), float(g2))


def argmin_phi(model: QueueModel, gamma2: ArrayLike) -> ArrayLike:
    """Return probability minimizing C(p) + gamma2 p (smallest p on ties)"""
    return model.cost.argmin_phi(gamma2)


def phi_min(model: QueueModel, gamma2: ArrayLike) -> ArrayLike:
    return model.cost.min_phi(gamma2)


def hamiltonian_arrays(
    model: QueueModel,
    solution: EquilibriumSolution,
    x: ArrayLike,
    y: ArrayLike,
    p: ArrayLike,
    gamma1: ArrayLike,
    gamma2: ArrayLike,
) -> np.ndarray:
    """Vectorised Hamiltonian over matching arrays of states, probabilities and costates"""
    m = model
    x, y, p = (np.asarray(v, dtype=float) for v in (x, y, p))
    busy = np.minimum(x, m.n)
    running = m.h * np.maximum(x - m.n, 0.0) + m.r * m.nu * y + np.asarray(m.cost.value(p)) * m.mu * busy
    drift_x = m.lam + m.nu * y - m.mu * busy
    drift_y = -m.nu * y + m.mu * p * busy
    return running - solution.J_inf + drift_x * np.asarray(gamma1) + drift_y * np.asarray(gamma2)


def hamiltonian(
    model: QueueModel,
    solution: EquilibriumSolution,
    s: FluidState,
    p: float,
    co: Costate,
) -> float:
    """
    Running cost in excess of J_inf plus costate-weighted drift

    Zero along optimal trajectories and minimized in p by argmin_phi(gamma2).
    """
    return float(hamiltonian_arrays(model, solution, s.x, s.y, p, co.gamma1, co.gamma2))
