"""
Confidence intervals for means and ratios of means
"""
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence
import math

import numpy as np
from scipy import stats

from returnctl.core.errors import UnboundedIntervalError


@dataclass(frozen=True)
class Interval:
    """Point estimate with a two-sided confidence interval"""
    estimate: float
    lower: float
    upper: float
    method: str
    level: float

    @property
    def half_width(self) -> float:
        return 0.5 * (self.upper - self.lower)

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def to_dict(self) -> Dict[str, Any]:
        return {
            "estimate": self.estimate,
            "lower": self.lower,
            "upper": self.upper,
            "method": self.method,
            "level": self.level,
        }


def _moments(num: Sequence[float], den: Sequence[float], paired: bool):
    a = np.asarray(num, dtype=float)
    b = np.asarray(den, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    if paired and a.size != b.size:
        raise ValueError("paired samples must have equal length")
    mean_a, mean_b = float(a.mean()), float(b.mean())
    var_a = float(a.var(ddof=1)) / a.size if a.size > 1 else 0.0
    var_b = float(b.var(ddof=1)) / b.size if b.size > 1 else 0.0
    cov = float(np.cov(a, b, ddof=1)[0, 1]) / a.size if paired and a.size > 1 else 0.0
    df = (a.size - 1) if paired else (a.size + b.size - 2)
    return mean_a, mean_b, var_a, var_b, cov, max(df, 1)


def fieller_ci(
    samples_num: Sequence[float],
    samples_den: Sequence[float],
    alpha: float = 0.05,
    paired: bool = False,
) -> Interval:
    """
    Fieller interval for mean(num) / mean(den)

    The interval is the set of ratios rho for which mean(num) - rho mean(den)
    is not significantly different from zero at level alpha.

    Raises:
        UnboundedIntervalError: If the denominator mean is not significantly
            different from zero
    """
    a, b, va, vb, cov, df = _moments(samples_num, samples_den, paired)
    t = float(stats.t.ppf(1.0 - alpha / 2.0, df))
    t2 = t * t
    if b == 0 or t2 * vb >= b * b:
        raise UnboundedIntervalError(
            f"denominator mean {b:.6g} is not significantly non-zero (se {math.sqrt(vb):.3g})"
        )
    ratio = a / b
    denom = b * b - t2 * vb
    centre = a * b - t2 * cov
    disc = centre * centre - denom * (a * a - t2 * va)
    root = math.sqrt(max(disc, 0.0))
    lower, upper = sorted(((centre - root) / denom, (centre + root) / denom))
    # rounding can push a zero-width interval off the point estimate
    lower, upper = min(lower, ratio), max(upper, ratio)
    return Interval(ratio, lower, upper, "fieller", 1.0 - alpha)


def delta_method_ci(
    samples_num: Sequence[float],
    samples_den: Sequence[float],
    alpha: float = 0.05,
    paired: bool = False,
) -> Interval:
    """First-order (delta method) interval for mean(num) / mean(den)"""
    a, b, va, vb, cov, df = _moments(samples_num, samples_den, paired)
    if b == 0:
        raise UnboundedIntervalError("denominator mean is zero")
    ratio = a / b
    se = math.sqrt(max(va - 2.0 * ratio * cov + ratio * ratio * vb, 0.0)) / abs(b)
    t = float(stats.t.ppf(1.0 - alpha / 2.0, df))
    return Interval(ratio, ratio - t * se, ratio + t * se, "delta", 1.0 - alpha)


def bootstrap_ratio_ci(
    samples_num: Sequence[float],
    samples_den: Sequence[float],
    alpha: float = 0.05,
    n_boot: int = 2000,
    seed: Optional[int] = None,
    paired: bool = True,
) -> Interval:
    """
    Percentile bootstrap interval for mean(num) / mean(den)

    Paired samples (common random numbers) are resampled jointly.
    """
    a = np.asarray(samples_num, dtype=float)
    b = np.asarray(samples_den, dtype=float)
    if paired and a.size != b.size:
        raise ValueError("paired samples must have equal length")
    rng = np.random.default_rng(seed)
    idx_a = rng.integers(0, a.size, size=(n_boot, a.size))
    idx_b = idx_a if paired else rng.integers(0, b.size, size=(n_boot, b.size))
    den = b[idx_b].mean(axis=1)
    if np.any(den == 0):
        raise UnboundedIntervalError("bootstrap denominator mean hit zero")
    ratios = a[idx_a].mean(axis=1) / den
    lower, upper = np.quantile(ratios, [alpha / 2.0, 1.0 - alpha / 2.0])
    return Interval(float(a.mean() / b.mean()), float(lower), float(upper), "bootstrap", 1.0 - alpha)


def mean_ci(values: Sequence[float], alpha: float = 0.05, method: str = "t") -> Interval:
    """Student-t interval for the mean of independent values"""
    x = np.asarray(values, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two values for an interval")
    mean = float(x.mean())
    se = float(x.std(ddof=1)) / math.sqrt(x.size)
    t = float(stats.t.ppf(1.0 - alpha / 2.0, x.size - 1))
    return Interval(mean, mean - t * se, mean + t * se, method, 1.0 - alpha)


def batch_means_ci(batch_means: Sequence[float], alpha: float = 0.05) -> Interval:
    """Student-t interval over the means of consecutive batches of one long run"""
    return mean_ci(batch_means, alpha, method="batch_means")
