"""
Tests for model parameters, cost functions and validation
"""
import numpy as np
import pytest

from returnctl.core.errors import IssueCode, ModelValidationError, OutOfDomainError
from returnctl.core.model import (
    CostForm,
    LinearCost,
    PiecewiseLinearCost,
    QuadraticCost,
    build_cost_function,
    cost_subgradient,
    cost_value,
    make_model,
)
from tests.fixtures.models import BASE, PIECEWISE_KNOTS, quadratic_model


def test_linear_cost_values():
    """Test C(p) = 5 (0.2 - p) for M = 0.5 on [0.1, 0.2]"""
    cost = build_cost_function("linear", 0.1, 0.2, M=0.5)
    assert isinstance(cost, LinearCost)
    assert cost.value(0.1) == pytest.approx(0.5)
    assert cost.value(0.15) == pytest.approx(0.25)
    assert cost.value(0.2) == 0.0
    lo, hi = cost.subgradient(0.13)
    assert lo == pytest.approx(-5.0) and hi == pytest.approx(-5.0)


def test_quadratic_cost_matches_scaled_form():
    """Test the quadratic cost equals 50 (0.2 - p)^2 for M = 0.5"""
    cost = build_cost_function("quadratic", 0.1, 0.2, M=0.5)
    assert isinstance(cost, QuadraticCost)
    ps = np.linspace(0.1, 0.2, 11)
    assert np.allclose(cost.value(ps), 50.0 * (0.2 - ps) ** 2)
    lo, _ = cost.subgradient(0.15)
    assert lo == pytest.approx(-100.0 * 0.05)


def test_piecewise_knots_are_convex():
    """Test the three-knot example is accepted with slopes -8 and -2"""
    cost = PiecewiseLinearCost.from_knots(PIECEWISE_KNOTS)
    assert cost.form == CostForm.PIECEWISE
    assert np.allclose(cost.slopes, [-8.0, -2.0])
    assert cost.value(0.125) == pytest.approx(0.3)


def test_piecewise_subgradient_at_kink():
    """Test the subgradient at a knot spans the adjacent slopes"""
    cost = PiecewiseLinearCost.from_knots(PIECEWISE_KNOTS)
    lo, hi = cost_subgradient(cost, 0.15)
    assert lo == pytest.approx(-8.0)
    assert hi == pytest.approx(-2.0)


def test_non_convex_knots_rejected():
    """Test decreasing slopes raise NonConvexCost"""
    with pytest.raises(ModelValidationError) as err:
        PiecewiseLinearCost.from_knots([(0.1, 0.5), (0.15, 0.4), (0.2, 0.0)])
    assert IssueCode.NON_CONVEX_COST in err.value.codes


def test_cost_must_vanish_at_upper_bound():
    with pytest.raises(ModelValidationError):
        PiecewiseLinearCost.from_knots([(0.1, 0.5), (0.2, 0.1)])


def test_cost_outside_domain_raises():
    """Test evaluating outside [p_l, p_u] raises OutOfDomain"""
    cost = build_cost_function("quadratic", 0.1, 0.2, M=1.0)
    with pytest.raises(OutOfDomainError):
        cost_value(cost, 0.25)
    with pytest.raises(OutOfDomainError):
        cost.value(np.array([0.1, 0.05]))


def test_argmin_phi_linear_is_bang_bang():
    """Test the linear minimizer switches at gamma2 = M / (p_u - p_l)"""
    cost = build_cost_function("linear", 0.1, 0.2, M=0.5)
    assert cost.argmin_phi(4.99) == 0.2
    assert cost.argmin_phi(5.0) == 0.1
    assert cost.argmin_phi(np.array([1.0, 10.0])).tolist() == [0.2, 0.1]


def test_argmin_phi_piecewise_visits_every_knot():
    cost = PiecewiseLinearCost.from_knots(PIECEWISE_KNOTS)
    assert cost.argmin_phi(1.0) == pytest.approx(0.2)
    assert cost.argmin_phi(5.0) == pytest.approx(0.15)
    assert cost.argmin_phi(9.0) == pytest.approx(0.1)


def test_min_phi_consistent_with_brute_force():
    """Test min_phi matches a dense grid search"""
    cost = build_cost_function("quadratic", 0.1, 0.2, M=0.5)
    grid = np.linspace(0.1, 0.2, 20001)
    for g2 in (0.0, 0.5, 1.2, 4.0):
        brute = np.min(cost.value(grid) + g2 * grid)
        assert cost.min_phi(g2) == pytest.approx(brute, abs=1e-8)


def test_valid_model_properties(quad_model):
    assert quad_model.orbit_threshold == pytest.approx((12.5 - 9.5) * 15.0)
    assert quad_model.system.max_stable_probability == pytest.approx(0.24)
    assert quad_model.system.offered_load == pytest.approx(38.0)
    assert quad_model.system.utilization(0.2) == pytest.approx(9.5 / (12.5 * 0.8))


def test_unstable_model_rejected():
    """Test p_u >= 1 - lambda/(mu N) raises Unstable"""
    with pytest.raises(ModelValidationError) as err:
        make_model(**dict(BASE, p_u=0.25, cost_form="quadratic", M=0.5))
    assert IssueCode.UNSTABLE in err.value.codes


def test_validation_collects_every_issue():
    """Test several violations are reported together"""
    params = dict(BASE, mu=-1.0, n_servers=0, p_l=0.3, p_u=0.2, h=-1.0, cost_form="linear", M=0.5)
    with pytest.raises(ModelValidationError) as err:
        make_model(**params)
    codes = set(err.value.codes)
    assert {IssueCode.BAD_RATE, IssueCode.BAD_SERVER_COUNT, IssueCode.BAD_PROBABILITY_INTERVAL,
            IssueCode.BAD_COST_PARAMETER} <= codes
    assert len(err.value.to_dict()["issues"]) == len(err.value.issues)


def test_negative_M_rejected():
    with pytest.raises(ModelValidationError):
        build_cost_function("linear", 0.1, 0.2, M=-1.0)


def test_with_overrides_revalidates():
    model = quadratic_model()
    changed = model.with_overrides(h=1.0, M=1.0)
    assert changed.h == 1.0
    assert changed.cost.value(0.1) == pytest.approx(1.0)
    assert model.h == 0.25
    with pytest.raises(ModelValidationError):
        model.with_overrides(lambda_bar=12.0)
    with pytest.raises(TypeError):
        model.with_overrides(colour="red")
