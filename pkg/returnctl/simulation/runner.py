"""
Single runs, independent replications and long-run estimation
"""
from dataclasses import dataclass
from multiprocessing import Pool
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union
import logging
import os
import time

import numpy as np
import pandas as pd

from returnctl.config import settings
from returnctl.core.errors import InvalidScenarioError
from returnctl.core.scenario import Scenario
from returnctl.experiments.statistics import Interval, batch_means_ci
from returnctl.simulation.base import BaseEngine, DecisionState, EngineKind
from returnctl.simulation.general_engine import GeneralEngine
from returnctl.simulation.ledger import RunResult
from returnctl.simulation.markov_engine import MarkovianEngine
from returnctl.simulation.policies import InterventionPolicy
from returnctl.utils.seeding import spawn_seeds

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.SeedSequence, None]

MIN_BATCHES = 10


def make_engine(
    scenario: Scenario,
    policy: InterventionPolicy,
    engine: Union[EngineKind, str, None] = None,
    decision_state: Union[DecisionState, str, None] = None,
) -> BaseEngine:
    """Engine for a scenario; 'auto' picks the Markovian engine for exponential durations"""
    kind = EngineKind(engine or scenario.simulation.engine)
    state = DecisionState(decision_state or scenario.simulation.decision_state)
    if kind == EngineKind.AUTO:
        kind = EngineKind.MARKOVIAN if scenario.exponential else EngineKind.GENERAL
    if kind == EngineKind.MARKOVIAN:
        return MarkovianEngine(scenario, policy, state)
    return GeneralEngine(scenario, policy, state)


def _seed_record(seed: SeedLike) -> Any:
    if isinstance(seed, np.random.SeedSequence):
        return {"entropy": seed.entropy, "spawn_key": list(seed.spawn_key)}
    return seed


def simulate(
    scenario: Scenario,
    policy: InterventionPolicy,
    s0: Tuple[int, int],
    horizon: float,
    seed: SeedLike = None,
    engine: Union[EngineKind, str, None] = None,
    decision_state: Union[DecisionState, str, None] = None,
    path_grid: Optional[Sequence[float]] = None,
    record_events: bool = False,
    record_from: float = 0.0,
    checkpoint_every: Optional[float] = None,
) -> RunResult:
    """
    One stochastic run from s0 over [0, horizon]

    Identical (scenario, policy, seed) give identical results.
    """
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng = np.random.default_rng(seq)
    sim = make_engine(scenario, policy, engine, decision_state)
    return sim.run(
        s0,
        horizon,
        rng,
        record_from=record_from,
        checkpoint_every=checkpoint_every,
        path_grid=path_grid,
        record_events=record_events,
        seed=_seed_record(seed),
    )


def _run_one(args: Tuple) -> RunResult:
    scenario, policy, s0, horizon, seed, engine, path_grid = args
    return simulate(scenario, policy, s0, horizon, seed=seed, engine=engine, path_grid=path_grid)


def resolve_jobs(jobs: Optional[int]) -> int:
    jobs = settings.jobs if jobs is None else jobs
    return max(1, jobs if jobs is not None else (os.cpu_count() or 1))


def run_replications(
    scenario: Scenario,
    policy: InterventionPolicy,
    s0: Tuple[int, int],
    horizon: float,
    n_reps: int,
    seed: Optional[int] = None,
    jobs: Optional[int] = None,
    path_grid: Optional[Sequence[float]] = None,
    engine: Union[EngineKind, str, None] = None,
) -> List[RunResult]:
    """
    Independent replications, each on its own spawned random stream

    Results come back in replication order whatever the number of workers.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    started = time.perf_counter()
    tasks = [
        (scenario, policy, tuple(s0), horizon, child, engine, path_grid)
        for child in spawn_seeds(seed, n_reps)
    ]
    workers = min(resolve_jobs(jobs), n_reps)
    if workers == 1:
        results = [_run_one(task) for task in tasks]
    else:
        with Pool(workers) as pool:
            results = pool.map(_run_one, tasks, chunksize=max(1, n_reps // (4 * workers)))
    logger.info(
        "%d replications of %s over %.4g days in %.2fs (%d workers)",
        n_reps, policy.name, horizon, time.perf_counter() - started, workers,
    )
    return results


def mean_path(results: Sequence[RunResult]) -> pd.DataFrame:
    """Average sampled (X, Y) across replications on their common grid"""
    if not results or results[0].path_times is None:
        raise ValueError("results carry no sampled paths")
    times = results[0].path_times
    xs = np.mean([r.path_x for r in results], axis=0)
    ys = np.mean([r.path_y for r in results], axis=0)
    return pd.DataFrame({"t": times, "X": xs, "Y": ys})


@dataclass
class LongRunEstimate:
    """Batch-means estimate of the long-run cost per day"""
    interval: Interval
    batch_rates: np.ndarray
    run: RunResult

    @property
    def mean(self) -> float:
        return self.interval.estimate

    def to_dict(self) -> Dict[str, Any]:
        return {
            "cost_rate": self.mean,
            "ci": [self.interval.lower, self.interval.upper],
            "batches": len(self.batch_rates),
            "ledger": self.run.ledger.to_dict(),
        }


def estimate_longrun(
    scenario: Scenario,
    policy: InterventionPolicy,
    warmup: Optional[float] = None,
    n_batches: Optional[int] = None,
    batch_length: Optional[float] = None,
    seed: SeedLike = None,
    s0: Optional[Tuple[int, int]] = None,
    alpha: Optional[float] = None,
    engine: Union[EngineKind, str, None] = None,
) -> LongRunEstimate:
    """
    Long-run cost rate from one long run: warm-up discarded, then
    `n_batches` consecutive batches of `batch_length` days
    """
    sim = scenario.simulation
    warmup = next(v for v in (warmup, sim.warmup, settings.warmup_days) if v is not None)
    n_batches = next(v for v in (n_batches, sim.batches, settings.n_batches) if v is not None)
    batch_length = next(v for v in (batch_length, sim.batch_length, settings.batch_length) if v is not None)
    alpha = 1.0 - settings.confidence_level if alpha is None else alpha
    if warmup < 0 or batch_length <= 0 or n_batches < MIN_BATCHES:
        raise InvalidScenarioError(
            f"need warmup >= 0, batch_length > 0 and at least {MIN_BATCHES} batches, "
            f"got warmup={warmup}, batch_length={batch_length}, batches={n_batches}",
            ["warmup", "batch_length", "batches"],
        )
    s0 = tuple(sim.s0) if s0 is None else s0

    run = simulate(
        scenario,
        policy,
        s0,
        warmup + n_batches * batch_length,
        seed=seed,
        engine=engine,
        record_from=warmup,
        checkpoint_every=batch_length,
    )
    rates = run.ledger.batch_totals()[:n_batches] / batch_length
    return LongRunEstimate(batch_means_ci(rates, alpha), rates, run)
