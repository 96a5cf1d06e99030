"""
Tests for the fluid dynamics and the RK4 integrator
"""
import math

import numpy as np
import pytest

from returnctl.core.errors import NonFiniteStateError, OutOfDomainError, UnstableProbabilityError
from returnctl.core.fluid import FluidModel, FluidState, Region, classify
from returnctl.utils.ode import rk4_step, rk4_step_scalar


def test_rhs_at_equilibrium_is_zero(quad_model):
    fluid = FluidModel(quad_model)
    point = fluid.equilibrium_point(0.15)
    dx, dy = fluid.fluid_rhs(point, 0.15)
    assert abs(dx) < 1e-12
    assert abs(dy) < 1e-12


def test_equilibrium_point_formula(quad_model):
    """Test the fixed point (lambda/(mu(1-p)), lambda p/(nu(1-p)))"""
    point = FluidModel(quad_model).equilibrium_point(0.2)
    assert point.x == pytest.approx(9.5 / (0.25 * 0.8))
    assert point.y == pytest.approx(9.5 * 0.2 * 15.0 / 0.8)


def test_unstable_probability(quad_model):
    with pytest.raises(UnstableProbabilityError):
        FluidModel(quad_model).equilibrium_point(0.3)


def test_regions_with_closed_boundary(quad_model):
    """Test the boundary of A belongs to A"""
    fluid = FluidModel(quad_model)
    thr = quad_model.orbit_threshold
    assert fluid.region_of(FluidState(50.0, thr)) == Region.A
    assert fluid.region_of(FluidState(50.0, thr + 1e-6)) == Region.N
    assert fluid.region_of(FluidState(50.0 + 1e-9, 0.0)) == Region.C
    labels = classify(quad_model, np.array([10.0, 60.0, 10.0]), np.array([10.0, 10.0, 100.0]))
    assert labels.tolist() == ["A", "C", "N"]


def test_state_must_be_non_negative():
    with pytest.raises(ValueError):
        FluidState(-1.0, 0.0)
    with pytest.raises(NonFiniteStateError):
        FluidState(math.nan, 0.0)


@pytest.mark.parametrize("seed", range(20))
def test_constant_policy_converges_to_fixed_point(quad_model, seed):
    """Test integration under constant p ends at the fixed point from anywhere in [0, 3N]^2"""
    rng = np.random.default_rng(seed)
    s0 = FluidState(*rng.uniform(0, 3 * quad_model.n, size=2))
    fluid = FluidModel(quad_model)
    traj = fluid.integrate(s0, 0.15, horizon=1000.0, dt=0.05)
    target = fluid.equilibrium_point(0.15)
    assert traj.final_state.x == pytest.approx(target.x, abs=1e-4)
    assert traj.final_state.y == pytest.approx(target.y, abs=1e-4)


def test_rk4_fourth_order():
    """Test halving the step divides the error by at least 8"""
    def rhs(t, z):
        return np.array([z[1], -z[0]])

    def solve(dt):
        z = np.array([1.0, 0.0])
        steps = int(round(2.0 / dt))
        for k in range(steps):
            z = rk4_step(rhs, k * dt, z, dt)
        return z

    exact = np.array([math.cos(2.0), -math.sin(2.0)])
    e1 = np.abs(solve(0.1) - exact).max()
    e2 = np.abs(solve(0.05) - exact).max()
    assert e1 / e2 >= 8.0


def test_scalar_and_array_steps_agree():
    def rhs_arr(t, z):
        return np.array([-0.5 * z[0] + t, z[0] - z[1]])

    def rhs_tup(t, z):
        return (-0.5 * z[0] + t, z[0] - z[1])

    a = rk4_step(rhs_arr, 0.3, np.array([1.0, 2.0]), 0.1)
    b = rk4_step_scalar(rhs_tup, 0.3, (1.0, 2.0), 0.1)
    assert np.allclose(a, b)


def test_fluid_rk4_order_on_trajectory(quad_model):
    """Test the fluid integrator converges at fourth order for smooth dynamics"""
    fluid = FluidModel(quad_model)
    s0 = FluidState(20.0, 30.0)  # stays below capacity: linear dynamics
    ref = fluid.integrate(s0, 0.15, horizon=4.8, dt=0.005).final_state
    coarse = fluid.integrate(s0, 0.15, horizon=4.8, dt=0.4).final_state
    fine = fluid.integrate(s0, 0.15, horizon=4.8, dt=0.2).final_state
    e1 = abs(coarse.x - ref.x) + abs(coarse.y - ref.y)
    e2 = abs(fine.x - ref.x) + abs(fine.y - ref.y)
    assert e1 / e2 >= 8.0


def test_integrated_cost_matches_closed_form(quad_model):
    """Test the running cost at a fixed point below capacity accrues at J(p)"""
    fluid = FluidModel(quad_model)
    p = 0.15
    point = fluid.equilibrium_point(p)
    traj = fluid.integrate(point, p, horizon=10.0, dt=0.1)
    rate = fluid.cost_rate(point, p)
    assert traj.total_cost == pytest.approx(10.0 * rate, rel=1e-9)
    j = 9.5 * (1.0 * p + float(quad_model.cost.value(p))) / (1 - p)
    assert rate == pytest.approx(j, rel=1e-9)


def test_policy_out_of_domain(quad_model):
    fluid = FluidModel(quad_model)
    with pytest.raises(OutOfDomainError):
        fluid.integrate(FluidState(10.0, 10.0), lambda x, y, t: 0.5, horizon=1.0)


def test_uneven_horizon_lands_exactly(quad_model):
    traj = FluidModel(quad_model).integrate(FluidState(60.0, 10.0), 0.2, horizon=1.03, dt=0.1)
    assert traj.times[-1] == pytest.approx(1.03)
    assert len(traj) == len(traj.x) == len(traj.p)


def test_entry_time_bound_is_reached(quad_model):
    """Test the path under p_u enters A before the bound"""
    fluid = FluidModel(quad_model)
    s0 = FluidState(120.0, 200.0)
    bound = fluid.entry_time_bound(s0)
    traj = fluid.integrate(s0, quad_model.p_u, horizon=bound, dt=0.05)
    hit = traj.time_to_region(quad_model, Region.A)
    assert hit is not None and hit <= bound


def test_time_varying_arrivals_change_path(quad_model):
    fluid = FluidModel(quad_model)
    s0 = FluidState(40.0, 40.0)
    flat = fluid.integrate(s0, 0.15, horizon=3.0, dt=0.01)
    wavy = fluid.integrate(
        s0, 0.15, horizon=3.0, dt=0.01, arrival_rate=lambda t: 9.5 * (1 + math.sin(2 * math.pi * t))
    )
    assert not np.allclose(flat.x, wavy.x)


def test_trajectory_csv(tmp_path, quad_model):
    traj = FluidModel(quad_model).integrate(FluidState(60.0, 10.0), 0.2, horizon=1.0, dt=0.25)
    path = traj.to_csv(tmp_path / "traj.csv")
    header = path.read_text().splitlines()[0]
    assert header == "t,x,y,p"


@pytest.mark.parametrize("seed", range(8))
def test_region_a_is_absorbing(quad_model, seed):
    """Test paths started in A stay there under randomly drawn admissible policies"""
    rng = np.random.default_rng(100 + seed)
    thr = quad_model.orbit_threshold
    s0 = FluidState(rng.uniform(0, quad_model.n), rng.uniform(0, thr))
    weights = rng.normal(size=3)
    levels = rng.uniform(quad_model.p_l, quad_model.p_u, size=16)

    def policy(x, y, t):
        # arbitrary measurable feedback that changes with state and time
        k = int(abs(weights[0] * x + weights[1] * y + weights[2] * t)) % len(levels)
        return float(levels[k])

    traj = FluidModel(quad_model).integrate(s0, policy, horizon=200.0, dt=0.05)
    assert np.all(traj.x <= quad_model.n + 1e-6)
    assert np.all(traj.y <= thr + 1e-6)
