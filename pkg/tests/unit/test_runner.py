"""
Tests for replications and long-run estimation
"""
import numpy as np
import pytest

from returnctl.core.errors import InvalidScenarioError
from returnctl.simulation.policies import EquilibriumPolicy
from returnctl.simulation.runner import (
    MIN_BATCHES,
    estimate_longrun,
    mean_path,
    resolve_jobs,
    run_replications,
    simulate,
)
from returnctl.utils.seeding import spawn_seeds
from tests.fixtures.models import small_scenario


def test_replications_follow_spawned_streams():
    """Test replication i equals a single run on the i-th child seed"""
    scenario = small_scenario()
    policy = EquilibriumPolicy(0.15)
    runs = run_replications(scenario, policy, (10, 5), 10.0, 4, seed=11, jobs=1)
    children = spawn_seeds(11, 4)
    for run, child in zip(runs, children):
        single = simulate(scenario, policy, (10, 5), 10.0, seed=child)
        assert run.total_cost == single.total_cost
    assert runs[0].seed["spawn_key"] == [0]
    assert len({r.total_cost for r in runs}) == 4


@pytest.mark.slow
def test_worker_pool_keeps_order():
    scenario = small_scenario()
    policy = EquilibriumPolicy(0.15)
    serial = run_replications(scenario, policy, (10, 5), 10.0, 6, seed=2, jobs=1)
    pooled = run_replications(scenario, policy, (10, 5), 10.0, 6, seed=2, jobs=2)
    assert [r.total_cost for r in serial] == [r.total_cost for r in pooled]


def test_replications_need_positive_count():
    with pytest.raises(ValueError):
        run_replications(small_scenario(), EquilibriumPolicy(0.15), (1, 1), 5.0, 0)


def test_mean_path_averages_replications():
    grid = np.linspace(0.0, 5.0, 6)
    runs = run_replications(
        small_scenario(), EquilibriumPolicy(0.15), (10, 5), 5.0, 3, seed=1, jobs=1, path_grid=grid
    )
    frame = mean_path(runs)
    assert frame["t"].tolist() == grid.tolist()
    assert frame["X"].iloc[0] == 10.0
    expected = np.mean([r.path_x[-1] for r in runs])
    assert frame["X"].iloc[-1] == pytest.approx(expected)


def test_mean_path_needs_paths():
    runs = run_replications(small_scenario(), EquilibriumPolicy(0.15), (10, 5), 5.0, 2, seed=1, jobs=1)
    with pytest.raises(ValueError):
        mean_path(runs)


def test_resolve_jobs():
    assert resolve_jobs(3) == 3
    assert resolve_jobs(0) == 1
    assert resolve_jobs(None) >= 1


def test_estimate_longrun_batches():
    scenario = small_scenario()
    estimate = estimate_longrun(
        scenario, EquilibriumPolicy(0.15), warmup=50.0, n_batches=10, batch_length=20.0, seed=3, s0=(9, 5)
    )
    assert len(estimate.batch_rates) == 10
    assert estimate.interval.method == "batch_means"
    assert estimate.interval.contains(estimate.mean)
    ledger = estimate.run.ledger
    assert ledger.elapsed == pytest.approx(200.0)
    assert estimate.mean == pytest.approx(ledger.total / 200.0)
    assert estimate.to_dict()["batches"] == 10


def test_estimate_longrun_needs_ten_batches():
    """Test fewer than ten batches are rejected as invalid input"""
    with pytest.raises(InvalidScenarioError) as err:
        estimate_longrun(small_scenario(), EquilibriumPolicy(0.15), warmup=10.0, n_batches=9, batch_length=5.0)
    assert "batches" in err.value.fields
    estimate = estimate_longrun(
        small_scenario(), EquilibriumPolicy(0.15), warmup=10.0, n_batches=MIN_BATCHES, batch_length=5.0, s0=(9, 5)
    )
    assert len(estimate.batch_rates) == MIN_BATCHES
