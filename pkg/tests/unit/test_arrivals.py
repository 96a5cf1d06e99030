"""
Tests for arrival processes and duration laws
"""
import math

import numpy as np
import pytest

from returnctl.core.scenario import ArrivalSpec, DurationSpec
from returnctl.simulation.arrivals import (
    CaseStudyWeeklyArrivals,
    SinusoidalArrivals,
    StationaryArrivals,
    build_arrival_process,
    sample_nhpp_next,
)
from returnctl.simulation.distributions import (
    Exponential,
    LogNormal,
    TruncatedExponential,
    build_duration,
)


def test_sinusoidal_rate_and_bound():
    arrivals = SinusoidalArrivals(9.5, 0.5, 4.0)
    assert arrivals.rate(1.0) == pytest.approx(9.5 * 1.5)
    assert arrivals.rate(3.0) == pytest.approx(9.5 * 0.5)
    assert arrivals.bound == pytest.approx(14.25)
    assert not arrivals.stationary
    assert SinusoidalArrivals(9.5, 0.0, 4.0).stationary


def test_sinusoidal_rejects_bad_amplitude():
    with pytest.raises(ValueError):
        SinusoidalArrivals(9.5, 1.5, 4.0)


def test_weekly_rate_pattern():
    arrivals = CaseStudyWeeklyArrivals()
    assert arrivals.base(2.3) == 6.14
    assert arrivals.base(5.5) == 5.32
    assert arrivals.base(9.0) == 6.14
    assert arrivals.rate(0.25) == pytest.approx(6.14 * 0.2)
    assert arrivals.mean_rate == pytest.approx((5 * 6.14 + 2 * 5.32) / 7)
    ts = np.linspace(0, 14, 5001)
    assert max(arrivals.rate(t) for t in ts) <= arrivals.bound


def test_thinning_mean_count():
    """Test the thinned process has the expected number of arrivals"""
    arrivals = SinusoidalArrivals(5.0, 0.8, 1.0)
    rng = np.random.default_rng(3)
    t, count = 0.0, 0
    while True:
        t = sample_nhpp_next(arrivals, t, rng)
        if t > 200.0:
            break
        count += 1
    # Poisson with mean 1000: sd about 32
    assert abs(count - 1000) < 130


def test_stationary_gaps_are_exponential():
    rng = np.random.default_rng(5)
    gaps = [sample_nhpp_next(StationaryArrivals(2.0), 0.0, rng) for _ in range(20000)]
    assert np.mean(gaps) == pytest.approx(0.5, rel=0.03)


def test_build_arrival_process(quad_model):
    assert build_arrival_process(ArrivalSpec(), quad_model) == StationaryArrivals(9.5)
    wavy = build_arrival_process(ArrivalSpec(type="sinusoidal", k=0.25, f=7), quad_model)
    assert wavy == SinusoidalArrivals(9.5, 0.25, 7)
    assert isinstance(build_arrival_process(ArrivalSpec(type="weekly"), quad_model), CaseStudyWeeklyArrivals)


def test_truncated_exponential_mean_and_bound():
    """Test an exponential of scale 25 truncated at 30 has mean near 12.07"""
    dist = TruncatedExponential(25.0, 30.0)
    assert dist.mean == pytest.approx(12.07, abs=0.01)
    rng = np.random.default_rng(11)
    draws = np.array([dist.sample(rng) for _ in range(40000)])
    assert draws.max() < 30.0
    assert draws.min() > 0.0
    assert draws.mean() == pytest.approx(dist.mean, rel=0.02)


def test_lognormal_mean():
    dist = LogNormal(1.38, 0.83)
    assert dist.mean == pytest.approx(math.exp(1.38 + 0.5 * 0.83 ** 2))
    rng = np.random.default_rng(12)
    draws = np.array([dist.sample(rng) for _ in range(40000)])
    assert draws.mean() == pytest.approx(dist.mean, rel=0.03)


def test_build_duration_defaults():
    assert build_duration(DurationSpec(), 0.25) == Exponential(0.25)
    assert build_duration(DurationSpec(mean=4.0), 0.25).rate == pytest.approx(0.25)
    assert build_duration(DurationSpec(mean=2.0), 0.25).rate == pytest.approx(0.5)
    spec = DurationSpec(type="truncated_exponential", scale=25, bound=30)
    assert not build_duration(spec, 0.1).exponential
