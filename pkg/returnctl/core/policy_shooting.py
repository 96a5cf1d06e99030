"""
Backward shooting of optimal trajectories out of the absorbing region

Optimal paths end in region A with the equilibrium costates. Integrating the
joint state-costate system backward in time from points on the boundary of
A traces the optimal paths that reach it, including those crossing region N.
The costates of all shots, spread onto a monotone lattice, give the policy
in region N.
"""
from dataclasses import dataclass
from typing import List, Optional, Sequence
import logging
import time

import numpy as np
import pandas as pd
from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator, RegularGridInterpolator
from scipy.spatial import QhullError

from returnctl.config import settings
from returnctl.core.equilibrium import EquilibriumSolution
from returnctl.core.errors import NonFiniteStateError
from returnctl.core.fluid import FluidState
from returnctl.core.model import QueueModel
from returnctl.core.policy_contours import ContourTable
from returnctl.core.policy_costates import hamiltonian_arrays
from returnctl.utils.ode import rk4_step

logger = logging.getLogger(__name__)

BOUNDARY_TOLERANCE = 1e-9


@dataclass
class ShotTrajectory:
    """
    One backward shot, ordered by backward time (times[0] = 0 at the anchor)
    """
    anchor: FluidState
    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    p: np.ndarray

    def __len__(self) -> int:
        return len(self.times)

    def hamiltonians(self, model: QueueModel, solution: EquilibriumSolution) -> np.ndarray:
        """Hamiltonian at every sample"""
        return hamiltonian_arrays(model, solution, self.x, self.y, self.p, self.gamma1, self.gamma2)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "s": self.times, "x": self.x, "y": self.y,
            "gamma1": self.gamma1, "gamma2": self.gamma2, "p": self.p,
        })


def is_on_a_boundary(model: QueueModel, s: FluidState) -> bool:
    n, thr = float(model.n), model.orbit_threshold
    tol_x = BOUNDARY_TOLERANCE * max(1.0, n)
    tol_y = BOUNDARY_TOLERANCE * max(1.0, thr)
    on_capacity = abs(s.x - n) <= tol_x and -tol_y <= s.y <= thr + tol_y
    on_orbit_cap = abs(s.y - thr) <= tol_y and -tol_x <= s.x <= n + tol_x
    return on_capacity or on_orbit_cap


def boundary_anchors(model: QueueModel, n_anchors: int) -> List[FluidState]:
    """
    Points on the boundary of A, uniform in arc length after scaling x by N
    and y by the orbit threshold

    The path runs up the capacity segment from (N, 0) to the corner and then
    left along the orbit threshold to (0, threshold).
    """
    if n_anchors < 2:
        raise ValueError("need at least two anchors")
    n, thr = float(model.n), model.orbit_threshold
    anchors = []
    for u in np.linspace(0.0, 2.0, n_anchors):
        if u <= 1.0:
            anchors.append(FluidState(n, u * thr))
        else:
            anchors.append(FluidState(max(n * (2.0 - u), 0.0), thr))
    return anchors


def _backward_rhs(model: QueueModel, congested: Optional[np.ndarray] = None):
    """
    Time-reversed state-costate dynamics

    `congested` fixes the regime of each column (x > N or not) instead of
    reading it from x, for sub-steps that must not see the switch.
    """
    lam, mu, nu, n, h, r = model.lam, model.mu, model.nu, float(model.n), model.h, model.r
    cost = model.cost

    def rhs(t: float, z: np.ndarray) -> np.ndarray:
        x, y, g1, g2 = z
        over = x > n if congested is None else congested
        p = np.asarray(cost.argmin_phi(g2), dtype=float)
        cp = np.asarray(cost.value(p), dtype=float)
        busy = np.where(over, n, x)
        dx = lam + nu * y - mu * busy
        dy = -nu * y + mu * p * busy
        dg1 = np.where(over, -h, mu * (g1 - p * g2 - cp))
        dg2 = nu * (g2 - g1 - r)
        return -np.stack([dx, dy, dg1, dg2])

    return rhs


def _congested(model: QueueModel, z: np.ndarray) -> np.ndarray:
    """x > N, or x = N with the backward flow heading into x > N"""
    n = float(model.n)
    entering = (z[0] == n) & (model.lam + model.nu * z[1] < model.mu * n)
    return (z[0] > n) | entering


def _step_across_capacity(
    model: QueueModel, t: float, z: np.ndarray, z_new: np.ndarray, dt: float, before: np.ndarray
) -> np.ndarray:
    """
    Redo steps whose x crosses N as two sub-steps meeting on x = N

    Each sub-step keeps the regime it starts in; the crossing time is the
    linear guess corrected by one Newton step on x - N.
    """
    n = float(model.n)
    stay = _backward_rhs(model, congested=before)
    frac = np.clip((n - z[0]) / (z_new[0] - z[0]), 0.0, 1.0)
    mid = rk4_step(stay, t, z, frac * dt)
    speed = stay(t, mid)[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(speed != 0.0, frac - (mid[0] - n) / (speed * dt), frac)
    frac = np.clip(frac, 0.0, 1.0)
    mid = rk4_step(stay, t, z, frac * dt)
    cross = _backward_rhs(model, congested=~before)
    return rk4_step(cross, t, mid, (1.0 - frac) * dt)


def shoot_many(
    model: QueueModel,
    solution: EquilibriumSolution,
    anchors: Sequence[FluidState],
    backward_horizon: Optional[float] = None,
    dt: Optional[float] = None,
    store_every: Optional[int] = None,
) -> List[ShotTrajectory]:
    """
    Shoot backward from several anchors at once

    A shot stops when it leaves the non-negative orthant; samples are
    stored every `store_every` steps.

    Raises:
        ValueError: If an anchor is not on the boundary of A
        NonFiniteStateError: If an active shot becomes NaN or infinite
    """
    backward_horizon = settings.shot_horizon if backward_horizon is None else backward_horizon
    dt = settings.shot_dt if dt is None else dt
    store_every = settings.shot_store_every if store_every is None else store_every
    for anchor in anchors:
        if not is_on_a_boundary(model, anchor):
            raise ValueError(f"anchor ({anchor.x}, {anchor.y}) is not on the boundary of A")

    k = len(anchors)
    z = np.empty((4, k))
    z[0] = [a.x for a in anchors]
    z[1] = [a.y for a in anchors]
    z[2] = solution.psi_x
    z[3] = solution.psi_y
    active = np.ones(k, dtype=bool)
    n = float(model.n)

    steps = max(1, int(np.ceil(backward_horizon / dt - 1e-9)))
    snapshots = [z.copy()]
    masks = [active.copy()]
    times = [0.0]
    for step in range(1, steps + 1):
        over = _congested(model, z)
        z_new = rk4_step(_backward_rhs(model, over), (step - 1) * dt, z, dt)
        if not np.all(np.isfinite(z_new[:, active])):
            raise NonFiniteStateError(f"backward shot diverged at s={step * dt:.4g}")
        crossing = active & (over != (z_new[0] > n)) & (z[0] != n)
        if crossing.any():
            z_new[:, crossing] = _step_across_capacity(
                model, (step - 1) * dt, z[:, crossing], z_new[:, crossing], dt, over[crossing]
            )
        active &= (z_new[0] >= 0.0) & (z_new[1] >= 0.0)
        z = np.where(active, z_new, z)
        if step % store_every == 0 or step == steps:
            snapshots.append(z.copy())
            masks.append(active.copy())
            times.append(step * dt)
        if not active.any():
            break

    stacked = np.stack(snapshots)  # (samples, 4, k)
    alive = np.stack(masks)  # (samples, k)
    sample_times = np.asarray(times)
    shots = []
    for j, anchor in enumerate(anchors):
        keep = alive[:, j]
        g2 = stacked[keep, 3, j]
        shots.append(ShotTrajectory(
            anchor=anchor,
            times=sample_times[keep],
            x=stacked[keep, 0, j],
            y=stacked[keep, 1, j],
            gamma1=stacked[keep, 2, j],
            gamma2=g2,
            p=np.asarray(model.cost.argmin_phi(g2), dtype=float),
        ))
    return shots


def shoot_from_A_boundary(
    model: QueueModel,
    solution: EquilibriumSolution,
    anchor: FluidState,
    backward_horizon: Optional[float] = None,
    dt: Optional[float] = None,
) -> ShotTrajectory:
    """Single backward shot from a point on the boundary of A"""
    return shoot_many(model, solution, [anchor], backward_horizon, dt)[0]


class ShootingGrid:
    """
    Costate lattice over region N built from a fan of backward shots

    The gamma2 values of all shot samples with x <= N are interpolated onto
    a regular lattice over [0, N] x [threshold, y_top], linearly on their
    triangulation and by the nearest sample outside it. The lattice is
    floored at the equilibrium costate, made non-decreasing along both
    axes and, when a contour table is given, capped on x = N by the gamma2
    of the contour line through that point. Queries read the lattice
    bilinearly and map gamma2 through the pointwise minimizer, so p is
    non-increasing in x and y and takes only the levels a linear or
    piecewise cost allows.
    """

    def __init__(
        self,
        model: QueueModel,
        solution: EquilibriumSolution,
        shots: List[ShotTrajectory],
        table: Optional[ContourTable] = None,
        lattice_points: Optional[int] = None,
    ):
        self.model = model
        self.shots = shots
        self._scale = np.array([float(model.n), model.orbit_threshold])
        xs = np.concatenate([s.x for s in shots])
        ys = np.concatenate([s.y for s in shots])
        g2 = np.concatenate([s.gamma2 for s in shots])
        keep = xs <= model.n
        self.x = xs[keep]
        self.y = ys[keep]
        self.gamma2 = g2[keep]
        self.p = np.asarray(model.cost.argmin_phi(self.gamma2), dtype=float).reshape(self.gamma2.shape)

        n_points = settings.shot_lattice_points if lattice_points is None else lattice_points
        thr = model.orbit_threshold
        y_top = max(float(self.y.max()) if len(self.y) else thr, thr + 1.0)
        self.xs = np.linspace(0.0, float(model.n), n_points)
        self.ys = np.linspace(thr, y_top, n_points)
        lattice = np.maximum(self._scatter_to_lattice(), solution.psi_y)
        lattice = _non_decreasing(_non_decreasing(lattice, axis=0), axis=1)
        if table is not None:
            table.cover_capacity(y_top)
            lattice = np.minimum(lattice, table.gamma2_at_capacity(self.ys)[None, :])
        self.lattice = lattice
        self._lookup = RegularGridInterpolator((self.xs, self.ys), lattice, method="linear")

    def _scatter_to_lattice(self) -> np.ndarray:
        points = np.column_stack([self.x, self.y]) / self._scale
        gx, gy = np.meshgrid(self.xs, self.ys, indexing="ij")
        targets = np.column_stack([gx.ravel(), gy.ravel()]) / self._scale
        values = NearestNDInterpolator(points, self.gamma2)(targets)
        try:
            linear = LinearNDInterpolator(points, self.gamma2)(targets)
            values = np.where(np.isnan(linear), values, linear)
        except QhullError:
            logger.debug("shot samples cannot be triangulated, using nearest samples only")
        return values.reshape(gx.shape)

    def __len__(self) -> int:
        return len(self.p)

    def gamma2_at(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        px = np.clip(np.ravel(x), self.xs[0], self.xs[-1])
        py = np.clip(np.ravel(y), self.ys[0], self.ys[-1])
        return self._lookup(np.column_stack([px, py])).reshape(np.shape(x))

    def query(self, x: float, y: float) -> float:
        return float(self.query_many(np.array([x]), np.array([y]))[0])

    def query_many(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        g2 = self.gamma2_at(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return np.asarray(self.model.cost.argmin_phi(g2), dtype=float).reshape(np.shape(x))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"x": self.x, "y": self.y, "gamma2": self.gamma2, "p": self.p})


def _non_decreasing(values: np.ndarray, axis: int) -> np.ndarray:
    """Midpoint of the running-max and reverse running-min envelopes along `axis`"""
    upper = np.maximum.accumulate(values, axis=axis)
    lower = np.flip(np.minimum.accumulate(np.flip(values, axis=axis), axis=axis), axis=axis)
    return 0.5 * (upper + lower)


def build_shooting_grid(
    model: QueueModel,
    solution: EquilibriumSolution,
    n_anchors: Optional[int] = None,
    backward_horizon: Optional[float] = None,
    dt: Optional[float] = None,
    table: Optional[ContourTable] = None,
) -> ShootingGrid:
    n_anchors = settings.shot_anchors if n_anchors is None else n_anchors
    started = time.perf_counter()
    shots = shoot_many(model, solution, boundary_anchors(model, n_anchors), backward_horizon, dt)
    grid = ShootingGrid(model, solution, shots, table)
    logger.info(
        "shot %d trajectories (%d samples in x <= N) in %.3fs",
        len(shots), len(grid), time.perf_counter() - started,
    )
    return grid
