"""
Tests for cost accounting
"""
import numpy as np
import pytest

from returnctl.simulation.ledger import CostLedger


def _ledger(**kwargs):
    return CostLedger(h=0.5, r=2.0, n_servers=10, **kwargs)


def test_holding_integral_is_exact():
    """Test h (X - N)+ is integrated piecewise"""
    ledger = _ledger()
    ledger.advance(1.0, 12, 0)   # 2 waiting for 1 day
    ledger.advance(3.5, 8, 4)    # nobody waiting
    ledger.advance(4.0, 15, 0)   # 5 waiting for half a day
    assert ledger.holding == pytest.approx(0.5 * (2 * 1.0 + 5 * 0.5))
    assert ledger.area_queue == pytest.approx(4.5)
    assert ledger.busy_time == pytest.approx(1.5)
    assert ledger.area_y == pytest.approx(10.0)


def test_returns_and_interventions():
    ledger = _ledger()
    ledger.record_completion(0.1, 0.5)
    ledger.record_completion(0.2, 0.0)
    ledger.record_return()
    assert ledger.returns_cost == 2.0
    assert ledger.intervention == 0.5
    assert ledger.direct == 2.5
    assert ledger.mean_applied_p == pytest.approx(0.15)
    assert ledger.interventions == {0.1: 1, 0.2: 1}


def test_warmup_is_discarded():
    ledger = _ledger(record_from=2.0)
    ledger.advance(1.0, 20, 0)
    ledger.record_return()
    ledger.record_arrival()
    assert ledger.total == 0.0 and ledger.arrivals == 0
    ledger.advance(3.0, 20, 0)
    assert ledger.holding == pytest.approx(0.5 * 10 * 1.0)
    assert ledger.elapsed == pytest.approx(1.0)
    ledger.record_return()
    assert ledger.returns == 1


def test_checkpoints_split_batches():
    """Test cumulative totals are taken at record_from + k * every"""
    ledger = _ledger(record_from=1.0, checkpoint_every=2.0)
    ledger.advance(4.0, 11, 0)   # checkpoint at 3.0
    ledger.record_return()
    ledger.advance(7.5, 12, 0)   # checkpoints at 5.0 and 7.0
    assert len(ledger.checkpoints) == 3
    batches = ledger.batch_totals()
    assert np.allclose(batches, [0.5 * 1 * 2.0, 0.5 * (1 * 1.0 + 2 * 1.0) + 2.0, 0.5 * 2 * 2.0])


def test_to_dict_rates():
    ledger = _ledger()
    ledger.advance(2.0, 12, 3)
    data = ledger.to_dict()
    assert data["cost_rate"] == pytest.approx(1.0)
    assert data["mean_queue"] == pytest.approx(2.0)
    assert data["busy_fraction"] == 1.0
    assert data["mean_applied_p"] is None


def test_empty_ledger_has_no_rates():
    data = _ledger().to_dict()
    assert data["cost_rate"] is None and data["elapsed"] == 0.0
