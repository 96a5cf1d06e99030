"""
Tests for experiment grids
"""
import pandas as pd
import pytest

from returnctl.core.errors import InvalidScenarioError
from returnctl.experiments.comparison import ComparisonResult, Mode
from returnctl.experiments.harness import (
    dominance_check,
    format_summary,
    list_grids,
    load_experiment_grid,
    run_grid,
)
from returnctl.experiments.statistics import Interval
from returnctl.simulation.policies import EquilibriumPolicy
from tests.fixtures.grids import write_registry


def _fake_result(*args, **kwargs):
    return ComparisonResult(
        policy_a="fluid", policy_b=args[2].name, mode=Mode(kwargs["mode"]), mean_a=9.0, mean_b=10.0,
        ratio=Interval(0.9, 0.8, 1.0, "fieller", 0.95), n_reps=kwargs["n_reps"], seed=kwargs["seed"],
        s0=kwargs["s0"],
    )


@pytest.fixture
def registry(tmp_path):
    return write_registry(tmp_path)


@pytest.fixture
def mocked_runs(mocker):
    mocker.patch(
        "returnctl.experiments.harness.build_intervention_policy",
        side_effect=lambda kind, *a, **k: EquilibriumPolicy(0.15) if kind != "fluid" else _named("fluid"),
    )
    return mocker.patch("returnctl.experiments.harness.compare_policies", side_effect=_fake_result)


def _named(name):
    policy = EquilibriumPolicy(0.15)
    policy.name = name
    return policy


def test_registry_grids_listed():
    assert {"cost_grid", "linear_cost_grid", "rate_grid", "time_varying", "case_study"} <= set(list_grids())


def test_cost_grid_size():
    """Test 15 (M, h) cells times 4 modes times 2 benchmarks"""
    grid = load_experiment_grid("cost_grid")
    cells = grid.cells()
    assert len(cells) == 15
    assert len(grid.modes()) == 4
    assert grid.row_count() == 120
    assert len({c.cell_id for c in cells}) == 15
    assert {c.scenario.model.cost.form.value for c in cells} == {"quadratic"}


def test_rate_grid_reads_fractions():
    grid = load_experiment_grid("rate_grid")
    nus = sorted({round(c.scenario.model.nu, 9) for c in grid.cells()})
    assert nus == [round(1 / 20, 9), round(1 / 15, 9), round(1 / 10, 9)]
    assert grid.base.model.nu == pytest.approx(1 / 15)


def test_case_study_grid_scenario():
    grid = load_experiment_grid("case_study")
    assert grid.base.service_dist.type == "lognormal"
    assert grid.base.model.mu == pytest.approx(1 / 5.6)
    assert grid.spec.holding_costs == [500, 1000, 1500, 2000, 2500, 3000]


def test_unknown_grid(registry):
    with pytest.raises(InvalidScenarioError, match="unknown grid"):
        load_experiment_grid("missing", registry)


def test_malformed_grid(registry):
    with pytest.raises(InvalidScenarioError) as err:
        load_experiment_grid("broken", registry)
    assert "colour" in err.value.fields


def test_run_grid_writes_every_row(registry, tmp_path, mocked_runs):
    grid = load_experiment_grid("tiny", registry)
    out = tmp_path / "tiny.csv"
    table = run_grid(grid, out, jobs=1)
    assert len(table) == grid.row_count() == 4
    assert mocked_runs.call_count == 4
    saved = pd.read_csv(out)
    assert len(saved) == 4
    assert set(saved["mode"]) == {"finite", "longrun"}
    assert {"param_h", "row_id"} <= set(saved.columns)
    finite_reps = {c.kwargs["n_reps"] for c in mocked_runs.call_args_list if c.kwargs["mode"] == Mode.FINITE}
    assert finite_reps == {4}


def test_row_seeds_are_distinct_and_stable(registry, tmp_path, mocked_runs):
    grid = load_experiment_grid("tiny", registry)
    run_grid(grid, tmp_path / "a.csv", jobs=1)
    first = [c.kwargs["seed"] for c in mocked_runs.call_args_list]
    mocked_runs.reset_mock()
    run_grid(grid, tmp_path / "b.csv", jobs=1)
    second = [c.kwargs["seed"] for c in mocked_runs.call_args_list]
    assert first == second
    assert len(set(first)) == 4


def test_run_grid_resumes(registry, tmp_path, mocked_runs):
    """Test completed rows are not recomputed"""
    grid = load_experiment_grid("tiny", registry)
    out = tmp_path / "tiny.csv"
    full = run_grid(grid, out, jobs=1)
    full.iloc[:2].to_csv(out, index=False)
    mocked_runs.reset_mock()
    table = run_grid(grid, out, jobs=1)
    assert mocked_runs.call_count == 2
    assert sorted(table["row_id"]) == sorted(full["row_id"])

    mocked_runs.reset_mock()
    run_grid(grid, out, jobs=1)
    assert mocked_runs.call_count == 0

    run_grid(grid, out, jobs=1, resume=False)
    assert mocked_runs.call_count == 4


def test_dominance_check():
    table = pd.DataFrame([
        {"scenario_id": "a", "mode": "finite", "s0_x": 25, "s0_y": 65, "ci_hi": -0.01},
        {"scenario_id": "a", "mode": "finite", "s0_x": 25, "s0_y": 65, "ci_hi": -0.02},
        {"scenario_id": "a", "mode": "longrun", "s0_x": None, "s0_y": None, "ci_hi": -0.03},
        {"scenario_id": "a", "mode": "longrun", "s0_x": None, "s0_y": None, "ci_hi": 0.01},
    ])
    violations = dominance_check(table)
    assert len(violations) == 1
    assert violations.iloc[0]["mode"] == "finite"
    assert dominance_check(table.iloc[2:]).empty


def test_format_summary_percentages():
    table = pd.DataFrame([{
        "scenario_id": "a", "benchmark": "equilibrium", "mode": "finite", "s0_x": 25, "s0_y": 65,
        "rel_red": 0.0567, "ci_lo": 0.05, "ci_hi": 0.06,
    }])
    text = format_summary(table)
    assert "rel_red" in text
    assert "5.67" in text
    assert text.splitlines()[1].startswith("|")


@pytest.mark.slow
def test_time_varying_study(registry, tmp_path):
    from returnctl.experiments.harness import run_time_varying_study

    grid = load_experiment_grid("tiny_waves", registry)
    frame = run_time_varying_study(grid, tmp_path / "waves.csv")
    assert len(frame) == 2
    assert {"k", "f", "mean_applied_p", "rel_red_equilibrium", "ci_lo_equilibrium"} <= set(frame.columns)
    assert frame["mean_applied_p"].between(0.1, 0.2).all()
    assert (tmp_path / "waves.csv").exists()


def test_missing_registry(tmp_path):
    with pytest.raises(InvalidScenarioError, match="cannot read"):
        load_experiment_grid("tiny", tmp_path / "nope.yaml")


@pytest.mark.parametrize("text", ["grids: [unclosed", "grids: [1, 2]", "- just\n- a list\n"])
def test_unusable_registry(tmp_path, text):
    path = tmp_path / "grids.yaml"
    path.write_text(text)
    with pytest.raises(InvalidScenarioError):
        list_grids(path)
