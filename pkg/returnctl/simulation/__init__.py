"""
Stochastic discrete-event simulation of the queue with controllable returns
"""
from returnctl.simulation.ledger import CostLedger, RunResult
from returnctl.simulation.policies import (
    ConstantPolicy,
    EquilibriumPolicy,
    FluidInterventionPolicy,
    InterventionPolicy,
    SimplePolicy,
    build_intervention_policy,
)
from returnctl.simulation.runner import (
    estimate_longrun,
    mean_path,
    run_replications,
    simulate,
)

__all__ = [
    'CostLedger',
    'RunResult',
    'ConstantPolicy',
    'EquilibriumPolicy',
    'FluidInterventionPolicy',
    'InterventionPolicy',
    'SimplePolicy',
    'build_intervention_policy',
    'estimate_longrun',
    'mean_path',
    'run_replications',
    'simulate',
]
