"""
Exception hierarchy for model validation, numerics and simulation
"""
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional


class IssueCode(str, Enum):
    """Kinds of model validation failures"""
    UNSTABLE = "Unstable"
    NON_CONVEX_COST = "NonConvexCost"
    BAD_PROBABILITY_INTERVAL = "BadProbabilityInterval"
    BAD_RATE = "BadRate"
    BAD_SERVER_COUNT = "BadServerCount"
    BAD_COST_PARAMETER = "BadCostParameter"


@dataclass(frozen=True)
class ValidationIssue:
    """A single violated model invariant"""
    code: IssueCode
    message: str

    def to_dict(self) -> Dict[str, str]:
        return {"code": self.code.value, "message": self.message}


class ReturnCtlError(ValueError):
    """Base class for all returnctl errors"""

    kind: str = "ReturnCtlError"

    def to_dict(self) -> Dict[str, Any]:
        return {"error": self.kind, "message": str(self), "issues": []}


class ModelValidationError(ReturnCtlError):
    """One or more model invariants are violated"""

    kind = "ModelValidationError"

    def __init__(self, issues: List[ValidationIssue]):
        self.issues = list(issues)
        summary = "; ".join(f"{i.code.value}: {i.message}" for i in self.issues)
        super().__init__(f"Invalid model: {summary}")

    @property
    def codes(self) -> List[IssueCode]:
        return [issue.code for issue in self.issues]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": self.kind,
            "message": str(self),
            "issues": [issue.to_dict() for issue in self.issues],
        }


class OutOfDomainError(ReturnCtlError):
    """A return probability lies outside [p_l, p_u]"""
    kind = "OutOfDomain"


class UnstableProbabilityError(ReturnCtlError):
    """No stable equilibrium exists for the requested return probability"""
    kind = "UnstableProbability"


class NonFiniteStateError(ReturnCtlError):
    """An integrator produced NaN or infinite values"""
    kind = "NonFiniteState"


class FanOutViolationError(ReturnCtlError):
    """Contour lines of the congested region are not ordered in the clearing time"""
    kind = "FanOutViolation"

    def __init__(self, message: str, index: Optional[int] = None):
        self.index = index
        super().__init__(message)


class UnboundedIntervalError(ReturnCtlError):
    """Fieller interval is unbounded because the denominator mean is not significantly non-zero"""
    kind = "UnboundedInterval"


class InvalidScenarioError(ReturnCtlError):
    """Scenario file cannot be parsed or describes an inconsistent setup"""

    kind = "InvalidScenario"

    def __init__(self, message: str, fields: Optional[List[str]] = None):
        self.fields = fields or []
        super().__init__(message)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": self.kind,
            "message": str(self),
            "issues": [{"field": f} for f in self.fields],
        }
