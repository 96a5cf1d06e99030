"""
Tests for scenario file parsing
"""
import pytest

from returnctl.core.errors import InvalidScenarioError, ModelValidationError
from returnctl.core.scenario import ArrivalSpec, load_scenario, parse_rate, scenario_from_dict
from tests.fixtures.models import scenario_data


def test_parse_rate_fractions():
    assert parse_rate("1/15") == pytest.approx(1.0 / 15.0)
    assert parse_rate(0.25) == 0.25
    assert parse_rate("1/0") == "1/0"


def test_load_scenario_file(scenario_file):
    scenario = load_scenario(scenario_file())
    assert scenario.name == "test"
    assert scenario.model.nu == pytest.approx(1.0 / 15.0)
    assert scenario.model.n == 50
    assert scenario.exponential
    assert scenario.arrivals.type == "stationary"
    assert scenario.simulation.decision_state == "post"


def test_name_defaults_to_file_stem(scenario_file):
    path = scenario_file(name=None)
    assert load_scenario(path).name == "scenario"


def test_unknown_key_lists_field(scenario_file):
    with pytest.raises(InvalidScenarioError) as err:
        load_scenario(scenario_file(colour="red"))
    assert "colour" in err.value.fields
    assert err.value.to_dict()["error"] == "InvalidScenario"


def test_missing_field_reported():
    data = scenario_data()
    del data["servers"]
    with pytest.raises(InvalidScenarioError) as err:
        scenario_from_dict(data)
    assert "servers" in err.value.fields


def test_piecewise_needs_knots():
    with pytest.raises(InvalidScenarioError):
        scenario_from_dict(scenario_data(cost={"type": "piecewise"}))


def test_lognormal_needs_parameters():
    with pytest.raises(InvalidScenarioError):
        scenario_from_dict(scenario_data(service_dist={"type": "lognormal", "log_mean": 1.0}))


def test_missing_file(tmp_path):
    with pytest.raises(InvalidScenarioError, match="not found"):
        load_scenario(tmp_path / "nope.json")


def test_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{ not json")
    with pytest.raises(InvalidScenarioError, match="not valid JSON"):
        load_scenario(path)


def test_top_level_must_be_object(tmp_path):
    path = tmp_path / "list.json"
    path.write_text("[1, 2]")
    with pytest.raises(InvalidScenarioError):
        load_scenario(path)


def test_model_errors_pass_through():
    """Test a well-formed file describing an unstable system"""
    with pytest.raises(ModelValidationError):
        scenario_from_dict(scenario_data(p_u=0.3))


def test_overrides_and_arrivals(quad_scenario):
    changed = quad_scenario.with_overrides(h=2.0)
    assert changed.model.h == 2.0
    assert quad_scenario.model.h == 0.25
    wavy = quad_scenario.with_arrivals(ArrivalSpec(type="sinusoidal", k=0.5, f=7))
    assert wavy.arrivals.k == 0.5
    assert wavy.model is quad_scenario.model


def test_non_exponential_scenario():
    scenario = scenario_from_dict(
        scenario_data(return_dist={"type": "truncated_exponential", "scale": 25, "bound": 30})
    )
    assert not scenario.exponential


@pytest.mark.parametrize(
    "return_dist",
    [
        {"type": "truncated_exponential", "mean": 25, "bound": 30},
        {"type": "truncated_exponential", "scale": 25},
        {"type": "truncated_exponential", "scale": 25, "mean": 12, "bound": 30},
    ],
)
def test_truncated_exponential_needs_scale_and_bound(return_dist):
    with pytest.raises(InvalidScenarioError):
        scenario_from_dict(scenario_data(return_dist=return_dist))
