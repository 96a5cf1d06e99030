"""
Aggregate statistics of simulated runs
"""
from typing import Dict, Sequence

from returnctl.simulation.ledger import RunResult


def intervention_summary(results: Sequence[RunResult]) -> Dict[str, float]:
    """
    Completion-weighted mean applied return probability and time-weighted
    fraction with all servers busy, pooled over runs
    """
    if not results:
        raise ValueError("no runs to summarise")
    completions = sum(r.ledger.completions for r in results)
    elapsed = sum(r.ledger.elapsed for r in results)
    return {
        "mean_applied_p": sum(r.ledger.sum_p for r in results) / completions if completions else float("nan"),
        "busy_fraction": sum(r.ledger.busy_time for r in results) / elapsed if elapsed else float("nan"),
        "mean_queue": sum(r.ledger.area_queue for r in results) / elapsed if elapsed else float("nan"),
        "direct_cost_rate": sum(r.ledger.direct for r in results) / elapsed if elapsed else float("nan"),
        "completions": float(completions),
    }
