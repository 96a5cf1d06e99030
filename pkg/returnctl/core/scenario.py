"""
Scenario files: JSON schema, loading and conversion to a validated model
"""
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union
import json
import logging

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from returnctl.core.errors import InvalidScenarioError
from returnctl.core.model import CostForm, QueueModel, make_model

logger = logging.getLogger(__name__)


def parse_rate(value: Any) -> Any:
    """Accept numbers and fraction strings such as '1/15'"""
    if isinstance(value, str) and "/" in value:
        num, den = value.split("/", 1)
        try:
            return float(num) / float(den)
        except (ValueError, ZeroDivisionError):
            return value
    return value


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class CostSpec(_Strict):
    """Intervention cost: linear/quadratic need M, piecewise needs knots"""
    type: CostForm
    M: Optional[float] = None
    knots: Optional[List[Tuple[float, float]]] = None

    @model_validator(mode="after")
    def _check_parameters(self) -> "CostSpec":
        if self.type == CostForm.PIECEWISE and not self.knots:
            raise ValueError("piecewise cost needs 'knots'")
        if self.type != CostForm.PIECEWISE and self.M is None:
            raise ValueError(f"{self.type.value} cost needs 'M'")
        return self


class ArrivalSpec(_Strict):
    """
    Arrival process

    stationary: rate lambda. sinusoidal: lambda (1 + k sin(2 pi t / f)).
    weekly: weekday/weekend base rates modulated by (1 - amplitude sin(2 pi t)).
    """
    type: Literal["stationary", "sinusoidal", "weekly"] = "stationary"
    k: float = Field(default=0.0, ge=0.0, le=1.0)
    f: float = Field(default=1.0, gt=0.0)
    weekday_rate: float = Field(default=6.14, gt=0.0)
    weekend_rate: float = Field(default=5.32, gt=0.0)
    amplitude: float = Field(default=0.8, ge=0.0, le=1.0)
    weekdays: int = Field(default=5, ge=0, le=7)


class DurationSpec(_Strict):
    """Service or return duration law; exponential defaults to the model rate"""
    type: Literal["exponential", "lognormal", "truncated_exponential"] = "exponential"
    # exponential only; truncated_exponential takes the untruncated scale instead
    mean: Optional[float] = Field(default=None, gt=0.0)
    scale: Optional[float] = Field(default=None, gt=0.0)
    log_mean: Optional[float] = None
    log_sd: Optional[float] = Field(default=None, gt=0.0)
    bound: Optional[float] = Field(default=None, gt=0.0)

    @model_validator(mode="after")
    def _check_parameters(self) -> "DurationSpec":
        if self.type == "lognormal" and (self.log_mean is None or self.log_sd is None):
            raise ValueError("lognormal needs 'log_mean' and 'log_sd'")
        if self.type == "truncated_exponential":
            if self.scale is None or self.bound is None:
                raise ValueError("truncated_exponential needs 'scale' and 'bound'")
            if self.mean is not None:
                raise ValueError("truncated_exponential takes 'scale'; its mean follows from scale and bound")
        return self


class PolicySpec(_Strict):
    type: Literal["fluid", "equilibrium", "simple"] = "fluid"


class SimulationSpec(_Strict):
    horizon: Optional[float] = Field(default=None, gt=0.0)
    s0: Tuple[int, int] = (0, 0)
    warmup: Optional[float] = Field(default=None, ge=0.0)
    batches: Optional[int] = Field(default=None, ge=10)
    batch_length: Optional[float] = Field(default=None, gt=0.0)
    reps: Optional[int] = Field(default=None, ge=1)
    engine: Literal["auto", "markovian", "general"] = "auto"
    decision_state: Literal["post", "pre"] = "post"


class ScenarioFile(_Strict):
    """On-disk scenario schema"""
    name: Optional[str] = None
    lambda_: float = Field(alias="lambda")
    mu: float
    nu: float
    servers: int
    p_l: float
    p_u: float
    h: float
    r: float
    cost: CostSpec
    arrivals: ArrivalSpec = Field(default_factory=ArrivalSpec)
    service_dist: DurationSpec = Field(default_factory=DurationSpec)
    return_dist: DurationSpec = Field(default_factory=DurationSpec)
    policy: PolicySpec = Field(default_factory=PolicySpec)
    simulation: SimulationSpec = Field(default_factory=SimulationSpec)

    @field_validator("lambda_", "mu", "nu", mode="before")
    @classmethod
    def _fractions(cls, value: Any) -> Any:
        return parse_rate(value)


@dataclass(frozen=True)
class Scenario:
    """Validated model plus the stochastic-simulation setup"""
    name: str
    model: QueueModel
    arrivals: ArrivalSpec = field(default_factory=ArrivalSpec)
    service_dist: DurationSpec = field(default_factory=DurationSpec)
    return_dist: DurationSpec = field(default_factory=DurationSpec)
    policy: PolicySpec = field(default_factory=PolicySpec)
    simulation: SimulationSpec = field(default_factory=SimulationSpec)

    @property
    def exponential(self) -> bool:
        """True when both durations are exponential (Markovian engine applies)"""
        return self.service_dist.type == "exponential" and self.return_dist.type == "exponential"

    def with_overrides(self, **overrides: Any) -> "Scenario":
        """Copy with model fields changed (see QueueModel.with_overrides)"""
        return replace(self, model=self.model.with_overrides(**overrides))

    def with_arrivals(self, arrivals: ArrivalSpec) -> "Scenario":
        return replace(self, arrivals=arrivals)


def _field_paths(err: ValidationError) -> List[str]:
    return [".".join(str(part) for part in e["loc"]) for e in err.errors()]


def scenario_from_dict(data: Dict[str, Any], name: Optional[str] = None) -> Scenario:
    """
    Build a scenario from a parsed JSON object

    Raises:
        InvalidScenarioError: If the object does not match the schema
        ModelValidationError: If the model violates its assumptions
    """
    try:
        spec = ScenarioFile.model_validate(data)
    except ValidationError as e:
        raise InvalidScenarioError(f"invalid scenario: {e.error_count()} problem(s)", _field_paths(e)) from e

    model = make_model(
        lambda_bar=spec.lambda_,
        mu=spec.mu,
        nu=spec.nu,
        n_servers=spec.servers,
        p_l=spec.p_l,
        p_u=spec.p_u,
        h=spec.h,
        r=spec.r,
        cost_form=spec.cost.type,
        M=spec.cost.M,
        knots=spec.cost.knots,
    )
    return Scenario(
        name=spec.name or name or "scenario",
        model=model,
        arrivals=spec.arrivals,
        service_dist=spec.service_dist,
        return_dist=spec.return_dist,
        policy=spec.policy,
        simulation=spec.simulation,
    )


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Read and validate a scenario JSON file"""
    path = Path(path)
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except FileNotFoundError as e:
        raise InvalidScenarioError(f"scenario file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise InvalidScenarioError(f"{path}: not valid JSON ({e.msg} at line {e.lineno})") from e
    if not isinstance(data, dict):
        raise InvalidScenarioError(f"{path}: top level must be an object")
    scenario = scenario_from_dict(data, name=path.stem)
    logger.debug("loaded scenario %s from %s", scenario.name, path)
    return scenario
