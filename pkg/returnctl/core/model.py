"""
Queueing model parameters, intervention cost functions and assumption checks

Units are days throughout: rates are per day, costs are per customer or per event.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union
import math

import numpy as np

from returnctl.core.errors import (
    IssueCode,
    ModelValidationError,
    OutOfDomainError,
    ValidationIssue,
)

ArrayLike = Union[float, np.ndarray]

# Rounding slack when checking p against [p_l, p_u]
DOMAIN_TOLERANCE = 1e-12


def _like(result: np.ndarray, template: ArrayLike) -> ArrayLike:
    """Return a float for scalar input, an array otherwise"""
    if np.ndim(template) == 0:
        return float(result)
    return np.asarray(result, dtype=float)


class CostForm(str, Enum):
    """Supported intervention cost shapes"""
    LINEAR = "linear"
    PIECEWISE = "piecewise"
    QUADRATIC = "quadratic"


@dataclass(frozen=True)
class CostFunction(ABC):
    """
    Convex, non-negative, non-increasing intervention cost C(p) on [p_l, p_u]
    with C(p_u) = 0. All methods accept scalars or numpy arrays.
    """
    p_l: float
    p_u: float

    @property
    @abstractmethod
    def form(self) -> CostForm:
        """Cost shape tag"""

    @abstractmethod
    def _value(self, p: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def _subgradient(self, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        pass

    @abstractmethod
    def _argmin_phi(self, gamma2: np.ndarray) -> np.ndarray:
        pass

    @property
    def width(self) -> float:
        return self.p_u - self.p_l

    @property
    def breakpoints(self) -> Optional[np.ndarray]:
        """Knots of a piecewise-linear cost (None for smooth costs)"""
        return None

    def _in_domain(self, p: ArrayLike) -> np.ndarray:
        arr = np.asarray(p, dtype=float)
        if np.any(~np.isfinite(arr)) or np.any(arr < self.p_l - DOMAIN_TOLERANCE) \
                or np.any(arr > self.p_u + DOMAIN_TOLERANCE):
            raise OutOfDomainError(
                f"return probability {p} outside [{self.p_l}, {self.p_u}]"
            )
        return np.clip(arr, self.p_l, self.p_u)

    def value(self, p: ArrayLike) -> ArrayLike:
        """C(p); exactly zero at p_u"""
        return _like(self._value(self._in_domain(p)), p)

    def subgradient(self, p: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
        """
        Subgradient interval [d_lo, d_hi] of C at p

        At differentiable points both ends equal C'(p); at a kink the
        interval is [left slope, right slope]. Domain endpoints use the
        one-sided slope.
        """
        lo, hi = self._subgradient(self._in_domain(p))
        return _like(lo, p), _like(hi, p)

    def argmin_phi(self, gamma2: ArrayLike) -> ArrayLike:
        """
        Minimizer of phi(p) = C(p) + gamma2 * p over [p_l, p_u]

        Ties (flat phi) resolve to the smallest optimal p.
        """
        g = np.asarray(gamma2, dtype=float)
        return _like(self._argmin_phi(g), gamma2)

    def phi(self, p: ArrayLike, gamma2: ArrayLike) -> ArrayLike:
        return _like(np.asarray(self.value(p)) + np.asarray(gamma2, dtype=float) * np.asarray(p), p)

    def min_phi(self, gamma2: ArrayLike) -> ArrayLike:
        """min over p of C(p) + gamma2 * p"""
        p_star = self.argmin_phi(gamma2)
        return _like(np.asarray(self.value(p_star)) + np.asarray(gamma2) * np.asarray(p_star), gamma2)

    def q_bounds(self, p: ArrayLike, r: float) -> Tuple[ArrayLike, ArrayLike]:
        """
        Bracket of q(p) = (1 - p) C'(p) + C(p) + r

        The sign of q is the sign of the slope of the equilibrium cost J.
        Kinks give a bracket from the left and right slopes.
        """
        lo, hi = self.subgradient(p)
        c = self.value(p)
        one_minus = 1.0 - np.asarray(p, dtype=float)
        return (
            _like(one_minus * lo + c + r, p),
            _like(one_minus * hi + c + r, p),
        )

    def convexity_issues(self) -> List[ValidationIssue]:
        """Structural invariants of the cost shape"""
        return []

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.form.value}


@dataclass(frozen=True)
class LinearCost(CostFunction):
    """C(p) = M (p_u - p) / (p_u - p_l)"""
    M: float = 0.0

    def __post_init__(self):
        issues = self.convexity_issues()
        if issues:
            raise ModelValidationError(issues)

    @property
    def form(self) -> CostForm:
        return CostForm.LINEAR

    @property
    def slope(self) -> float:
        """Magnitude of the (negative) derivative"""
        return self.M / self.width

    @property
    def breakpoints(self) -> np.ndarray:
        return np.array([self.p_l, self.p_u])

    def _value(self, p: np.ndarray) -> np.ndarray:
        return self.M * (self.p_u - p) / self.width

    def _subgradient(self, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        d = np.full_like(p, -self.slope, dtype=float)
        return d, d.copy()

    def _argmin_phi(self, gamma2: np.ndarray) -> np.ndarray:
        # bang-bang: full intervention once gamma2 reaches M / (p_u - p_l)
        return np.where(gamma2 >= self.slope, self.p_l, self.p_u)

    def convexity_issues(self) -> List[ValidationIssue]:
        if not math.isfinite(self.M) or self.M < 0:
            return [ValidationIssue(IssueCode.BAD_COST_PARAMETER, f"M must be >= 0, got {self.M}")]
        return []

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.form.value, "M": self.M}


@dataclass(frozen=True)
class QuadraticCost(CostFunction):
    """C(p) = M ((p_u - p) / (p_u - p_l))^2"""
    M: float = 0.0

    def __post_init__(self):
        issues = self.convexity_issues()
        if issues:
            raise ModelValidationError(issues)

    @property
    def form(self) -> CostForm:
        return CostForm.QUADRATIC

    def _value(self, p: np.ndarray) -> np.ndarray:
        return self.M * ((self.p_u - p) / self.width) ** 2

    def _subgradient(self, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        d = -2.0 * self.M * (self.p_u - p) / self.width ** 2
        return d, np.array(d, copy=True)

    def _argmin_phi(self, gamma2: np.ndarray) -> np.ndarray:
        if self.M == 0:
            return np.where(gamma2 >= 0, self.p_l, self.p_u)
        # first-order condition C'(p) = -gamma2, clamped to the domain
        p = self.p_u - gamma2 * self.width ** 2 / (2.0 * self.M)
        return np.clip(p, self.p_l, self.p_u)

    def convexity_issues(self) -> List[ValidationIssue]:
        if not math.isfinite(self.M) or self.M < 0:
            return [ValidationIssue(IssueCode.BAD_COST_PARAMETER, f"M must be >= 0, got {self.M}")]
        return []

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.form.value, "M": self.M}


@dataclass(frozen=True)
class PiecewiseLinearCost(CostFunction):
    """Linear interpolation through ordered (p, cost) knots spanning [p_l, p_u]"""
    knots: Tuple[Tuple[float, float], ...] = ()
    _ps: np.ndarray = field(init=False, repr=False, compare=False)
    _cs: np.ndarray = field(init=False, repr=False, compare=False)
    _slopes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        knots = tuple((float(p), float(c)) for p, c in self.knots)
        object.__setattr__(self, "knots", knots)
        ps = np.array([k[0] for k in knots], dtype=float)
        cs = np.array([k[1] for k in knots], dtype=float)
        object.__setattr__(self, "_ps", ps)
        object.__setattr__(self, "_cs", cs)
        if len(knots) >= 2 and np.all(np.diff(ps) > 0):
            object.__setattr__(self, "_slopes", np.diff(cs) / np.diff(ps))
        else:
            object.__setattr__(self, "_slopes", np.zeros(0))
        issues = self.convexity_issues()
        if issues:
            raise ModelValidationError(issues)

    @classmethod
    def from_knots(cls, knots: Sequence[Tuple[float, float]]) -> "PiecewiseLinearCost":
        if len(knots) < 2:
            raise ModelValidationError([
                ValidationIssue(IssueCode.NON_CONVEX_COST, "piecewise cost needs at least two knots")
            ])
        return cls(p_l=float(knots[0][0]), p_u=float(knots[-1][0]), knots=tuple(knots))

    @property
    def form(self) -> CostForm:
        return CostForm.PIECEWISE

    @property
    def breakpoints(self) -> np.ndarray:
        return self._ps.copy()

    @property
    def slopes(self) -> np.ndarray:
        return self._slopes.copy()

    def _snap(self, p: np.ndarray) -> np.ndarray:
        nearest = self._ps[np.abs(p[..., None] - self._ps).argmin(axis=-1)]
        return np.where(np.abs(p - nearest) <= DOMAIN_TOLERANCE, nearest, p)

    def _value(self, p: np.ndarray) -> np.ndarray:
        return np.interp(p, self._ps, self._cs)

    def _subgradient(self, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        p = self._snap(p)
        last = len(self._slopes) - 1
        right = np.clip(np.searchsorted(self._ps, p, side="right") - 1, 0, last)
        left = np.clip(np.searchsorted(self._ps, p, side="left") - 1, 0, last)
        return self._slopes[left], self._slopes[right]

    def _argmin_phi(self, gamma2: np.ndarray) -> np.ndarray:
        g = gamma2.reshape(-1)
        # smallest knot whose right slope makes phi non-decreasing
        rising = self._slopes[None, :] + g[:, None] >= 0
        found = rising.any(axis=1)
        first = rising.argmax(axis=1)
        p = np.where(found, self._ps[first], self.p_u)
        return p.reshape(gamma2.shape)

    def convexity_issues(self) -> List[ValidationIssue]:
        issues = []
        ps, cs = self._ps, self._cs
        if len(ps) < 2:
            return [ValidationIssue(IssueCode.NON_CONVEX_COST, "piecewise cost needs at least two knots")]
        if not np.all(np.diff(ps) > 0):
            issues.append(ValidationIssue(IssueCode.NON_CONVEX_COST, "knots must be strictly increasing in p"))
            return issues
        if abs(ps[0] - self.p_l) > DOMAIN_TOLERANCE or abs(ps[-1] - self.p_u) > DOMAIN_TOLERANCE:
            issues.append(ValidationIssue(
                IssueCode.BAD_COST_PARAMETER, "first and last knots must sit at p_l and p_u"
            ))
        if np.any(cs < 0):
            issues.append(ValidationIssue(IssueCode.NON_CONVEX_COST, "knot costs must be non-negative"))
        if cs[-1] != 0:
            issues.append(ValidationIssue(IssueCode.NON_CONVEX_COST, "cost at p_u must be exactly 0"))
        if np.any(self._slopes > DOMAIN_TOLERANCE):
            issues.append(ValidationIssue(IssueCode.NON_CONVEX_COST, "cost must be non-increasing in p"))
        if np.any(np.diff(self._slopes) < -1e-9):
            issues.append(ValidationIssue(
                IssueCode.NON_CONVEX_COST,
                f"knot slopes {np.round(self._slopes, 6).tolist()} are not non-decreasing",
            ))
        return issues

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.form.value, "knots": [list(k) for k in self.knots]}


def build_cost_function(
    form: Union[CostForm, str],
    p_l: float,
    p_u: float,
    M: Optional[float] = None,
    knots: Optional[Sequence[Tuple[float, float]]] = None,
) -> CostFunction:
    """
    Create an intervention cost function

    Args:
        form: 'linear', 'quadratic' or 'piecewise'
        p_l, p_u: Return probability interval
        M: Cost of full intervention C(p_l) (linear and quadratic)
        knots: Ordered (p, cost) pairs (piecewise)

    Returns:
        CostFunction instance
    """
    form = CostForm(form)
    if form == CostForm.PIECEWISE:
        if not knots:
            raise ModelValidationError([
                ValidationIssue(IssueCode.BAD_COST_PARAMETER, "piecewise cost requires knots")
            ])
        cost = PiecewiseLinearCost.from_knots(knots)
        if abs(cost.p_l - p_l) > DOMAIN_TOLERANCE or abs(cost.p_u - p_u) > DOMAIN_TOLERANCE:
            raise ModelValidationError([
                ValidationIssue(
                    IssueCode.BAD_COST_PARAMETER,
                    f"knots span [{cost.p_l}, {cost.p_u}] but the model uses [{p_l}, {p_u}]",
                )
            ])
        return cost
    if M is None:
        raise ModelValidationError([
            ValidationIssue(IssueCode.BAD_COST_PARAMETER, f"{form.value} cost requires M")
        ])
    if form == CostForm.LINEAR:
        return LinearCost(p_l=p_l, p_u=p_u, M=float(M))
    return QuadraticCost(p_l=p_l, p_u=p_u, M=float(M))


def cost_value(cost: CostFunction, p: ArrayLike) -> ArrayLike:
    return cost.value(p)


def cost_subgradient(cost: CostFunction, p: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
    return cost.subgradient(p)


@dataclass(frozen=True)
class SystemParams:
    """Arrival, service, return rates (per day), server count and return-probability range"""
    lambda_bar: float
    mu: float
    nu: float
    n_servers: int
    p_l: float
    p_u: float

    @property
    def capacity(self) -> float:
        """Maximum service completion rate mu * N"""
        return self.mu * self.n_servers

    @property
    def orbit_threshold(self) -> float:
        """Content level (mu N - lambda) / nu separating the empty-queue regions"""
        return (self.capacity - self.lambda_bar) / self.nu

    @property
    def offered_load(self) -> float:
        """External load lambda / mu in servers"""
        return self.lambda_bar / self.mu

    @property
    def max_stable_probability(self) -> float:
        return 1.0 - self.lambda_bar / self.capacity

    def utilization(self, p: float) -> float:
        """Offered load per server under a constant return probability"""
        return self.lambda_bar / (self.capacity * (1.0 - p))


@dataclass(frozen=True)
class CostParams:
    """Holding cost rate h, per-return cost r and the intervention cost function"""
    h: float
    r: float
    intervention: CostFunction


@dataclass(frozen=True)
class QueueModel:
    """A validated pair of system and cost parameters"""
    system: SystemParams
    costs: CostParams

    # Shorthands used throughout the numerics
    @property
    def lam(self) -> float:
        return self.system.lambda_bar

    @property
    def mu(self) -> float:
        return self.system.mu

    @property
    def nu(self) -> float:
        return self.system.nu

    @property
    def n(self) -> int:
        return self.system.n_servers

    @property
    def p_l(self) -> float:
        return self.system.p_l

    @property
    def p_u(self) -> float:
        return self.system.p_u

    @property
    def h(self) -> float:
        return self.costs.h

    @property
    def r(self) -> float:
        return self.costs.r

    @property
    def cost(self) -> CostFunction:
        return self.costs.intervention

    @property
    def orbit_threshold(self) -> float:
        return self.system.orbit_threshold

    def with_overrides(self, **overrides: Any) -> "QueueModel":
        """
        Copy with modified parameters, re-validated

        Accepts SystemParams/CostParams field names plus `M` (rescales a
        linear or quadratic intervention cost).
        """
        system_names = {f.name for f in fields(SystemParams)}
        cost_names = {"h", "r", "intervention"}
        system_updates = {k: v for k, v in overrides.items() if k in system_names}
        cost_updates = {k: v for k, v in overrides.items() if k in cost_names}
        unknown = set(overrides) - system_names - cost_names - {"M"}
        if unknown:
            raise TypeError(f"unknown model fields: {sorted(unknown)}")

        system = replace(self.system, **system_updates)
        intervention = cost_updates.pop("intervention", self.cost)
        if "M" in overrides:
            if intervention.form == CostForm.PIECEWISE:
                raise ModelValidationError([
                    ValidationIssue(IssueCode.BAD_COST_PARAMETER, "M does not apply to piecewise costs")
                ])
            intervention = replace(intervention, M=float(overrides["M"]))
        if (system.p_l, system.p_u) != (intervention.p_l, intervention.p_u) \
                and intervention.form != CostForm.PIECEWISE:
            intervention = replace(intervention, p_l=system.p_l, p_u=system.p_u)
        costs = replace(self.costs, intervention=intervention, **cost_updates)
        return validate(system, costs)


def collect_issues(params: SystemParams, costs: CostParams) -> List[ValidationIssue]:
    """Every violated model invariant (empty list when the model is valid)"""
    issues: List[ValidationIssue] = []

    rates_ok = True
    for name in ("lambda_bar", "mu", "nu"):
        value = getattr(params, name)
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            issues.append(ValidationIssue(IssueCode.BAD_RATE, f"{name} must be positive, got {value}"))
            rates_ok = False

    if int(params.n_servers) != params.n_servers or params.n_servers < 1:
        issues.append(ValidationIssue(
            IssueCode.BAD_SERVER_COUNT, f"n_servers must be an integer >= 1, got {params.n_servers}"
        ))
        rates_ok = False

    interval_ok = 0 < params.p_l < params.p_u < 1
    if not interval_ok:
        issues.append(ValidationIssue(
            IssueCode.BAD_PROBABILITY_INTERVAL,
            f"need 0 < p_l < p_u < 1, got p_l={params.p_l}, p_u={params.p_u}",
        ))

    if rates_ok and interval_ok and not params.p_u < params.max_stable_probability:
        issues.append(ValidationIssue(
            IssueCode.UNSTABLE,
            f"p_u={params.p_u} must be below 1 - lambda/(mu N) = {params.max_stable_probability:.6g}",
        ))

    if not (math.isfinite(costs.h) and costs.h >= 0):
        issues.append(ValidationIssue(IssueCode.BAD_COST_PARAMETER, f"h must be >= 0, got {costs.h}"))
    if not (math.isfinite(costs.r) and costs.r >= 0):
        issues.append(ValidationIssue(IssueCode.BAD_COST_PARAMETER, f"r must be >= 0, got {costs.r}"))

    cost = costs.intervention
    if abs(cost.p_l - params.p_l) > DOMAIN_TOLERANCE or abs(cost.p_u - params.p_u) > DOMAIN_TOLERANCE:
        issues.append(ValidationIssue(
            IssueCode.BAD_COST_PARAMETER,
            f"cost domain [{cost.p_l}, {cost.p_u}] differs from [{params.p_l}, {params.p_u}]",
        ))
    issues.extend(cost.convexity_issues())
    return issues


def validate(params: SystemParams, costs: CostParams) -> QueueModel:
    """
    Check the standing assumptions and return the validated model

    Raises:
        ModelValidationError: listing every violated invariant
    """
    issues = collect_issues(params, costs)
    if issues:
        raise ModelValidationError(issues)
    return QueueModel(system=params, costs=costs)


def make_model(
    lambda_bar: float,
    mu: float,
    nu: float,
    n_servers: int,
    p_l: float,
    p_u: float,
    h: float,
    r: float,
    cost_form: Union[CostForm, str] = CostForm.QUADRATIC,
    M: Optional[float] = None,
    knots: Optional[Sequence[Tuple[float, float]]] = None,
) -> QueueModel:
    """Build and validate a model from plain numbers"""
    system = SystemParams(
        lambda_bar=float(lambda_bar), mu=float(mu), nu=float(nu),
        n_servers=n_servers, p_l=float(p_l), p_u=float(p_u),
    )
    intervention = build_cost_function(cost_form, float(p_l), float(p_u), M=M, knots=knots)
    return validate(system, CostParams(h=float(h), r=float(r), intervention=intervention))
