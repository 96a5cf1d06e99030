"""
Shared pytest fixtures
"""
import json
import logging

import pytest

from returnctl.core.equilibrium import solve_equilibrium
from returnctl.core.fluid_policy import build_policy
from tests.fixtures.models import (
    case_study_model,
    linear_model,
    piecewise_model,
    quadratic_model,
    quadratic_scenario,
    scenario_data,
    small_scenario,
)


@pytest.fixture(autouse=True)
def _package_logger():
    """Undo configure_logging so caplog keeps seeing package records"""
    yield
    logger = logging.getLogger("returnctl")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    logger.propagate = True
    logger.setLevel(logging.NOTSET)


@pytest.fixture
def quad_model():
    return quadratic_model()


@pytest.fixture
def lin_model():
    return linear_model()


@pytest.fixture
def pw_model():
    return piecewise_model()


@pytest.fixture
def cs_model():
    return case_study_model()


@pytest.fixture
def quad_solution(quad_model):
    return solve_equilibrium(quad_model)


@pytest.fixture(scope="session")
def quad_policy():
    """Fluid policy of the quadratic example, built once per session"""
    model = quadratic_model()
    return build_policy(model, n_lines=400, n_anchors=60)


@pytest.fixture(scope="session")
def small_policy_scenario():
    scenario = small_scenario()
    return scenario, build_policy(scenario.model, n_lines=200, n_anchors=40)


@pytest.fixture
def quad_scenario():
    return quadratic_scenario()


@pytest.fixture
def scenario_file(tmp_path):
    """Write a scenario JSON file and return its path"""

    def _write(**overrides):
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(scenario_data(**overrides)))
        return path

    return _write
