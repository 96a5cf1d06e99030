"""
Tests for pooled run statistics
"""
import math

import pytest

from returnctl.experiments.summaries import intervention_summary
from returnctl.simulation.ledger import CostLedger, RunResult


def _congested_run():
    ledger = CostLedger(h=0.5, r=2.0, n_servers=10)
    ledger.advance(10.0, 12, 3)
    ledger.record_completion(0.2, 1.0)
    ledger.record_completion(0.2, 1.0)
    ledger.record_return()
    return RunResult(ledger=ledger, horizon=10.0, s0=(12, 3), final_state=(10, 4))


def _quiet_run():
    ledger = CostLedger(h=0.5, r=2.0, n_servers=10)
    ledger.advance(30.0, 5, 1)
    ledger.record_completion(0.1, 0.0)
    ledger.record_completion(0.1, 0.0)
    return RunResult(ledger=ledger, horizon=30.0, s0=(5, 1), final_state=(3, 1))


def test_pooled_over_runs():
    """Test completions weight p and elapsed time weights the rates"""
    summary = intervention_summary([_congested_run(), _quiet_run()])
    assert summary["completions"] == 4.0
    assert summary["mean_applied_p"] == pytest.approx(0.15)
    assert summary["busy_fraction"] == pytest.approx(10.0 / 40.0)
    assert summary["mean_queue"] == pytest.approx(20.0 / 40.0)
    assert summary["direct_cost_rate"] == pytest.approx(4.0 / 40.0)


def test_single_run_matches_ledger():
    run = _congested_run()
    summary = intervention_summary([run])
    assert summary["mean_applied_p"] == pytest.approx(run.ledger.mean_applied_p)
    assert summary["direct_cost_rate"] == pytest.approx(run.ledger.direct / run.ledger.elapsed)


def test_run_without_completions():
    ledger = CostLedger(h=0.5, r=2.0, n_servers=10)
    ledger.advance(5.0, 0, 0)
    summary = intervention_summary([RunResult(ledger=ledger, horizon=5.0, s0=(0, 0), final_state=(0, 0))])
    assert math.isnan(summary["mean_applied_p"])
    assert summary["busy_fraction"] == 0.0


def test_no_runs():
    with pytest.raises(ValueError):
        intervention_summary([])
