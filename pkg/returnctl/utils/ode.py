"""
Fixed-step 4th order Runge-Kutta stepping for numpy state vectors
"""
from typing import Callable

import numpy as np

Rhs = Callable[[float, np.ndarray], np.ndarray]


def rk4_step(rhs: Rhs, t: float, z: np.ndarray, dt: float) -> np.ndarray:
    """
    Advance z' = rhs(t, z) by one step of length dt

    Args:
        rhs: Right-hand side, returns an array shaped like z
        t: Current time
        z: Current state (any shape)
        dt: Step length (negative values step backward in time)

    Returns:
        New state array
    """
    half = 0.5 * dt
    k1 = rhs(t, z)
    k2 = rhs(t + half, z + half * k1)
    k3 = rhs(t + half, z + half * k2)
    k4 = rhs(t + dt, z + dt * k3)
    return z + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)


def rk4_step_scalar(rhs: Callable, t: float, z: tuple, dt: float) -> tuple:
    """
    Tuple-of-floats variant of `rk4_step` for small systems integrated
    one trajectory at a time (avoids numpy overhead on 2-3 component states)
    """
    half = 0.5 * dt
    k1 = rhs(t, z)
    k2 = rhs(t + half, tuple(a + half * b for a, b in zip(z, k1)))
    k3 = rhs(t + half, tuple(a + half * b for a, b in zip(z, k2)))
    k4 = rhs(t + dt, tuple(a + dt * b for a, b in zip(z, k3)))
    sixth = dt / 6.0
    return tuple(
        a + sixth * (b1 + 2.0 * (b2 + b3) + b4)
        for a, b1, b2, b3, b4 in zip(z, k1, k2, k3, k4)
    )
