"""Exception hierarchy shared by all modules.

Errors split into two families so the CLI can map them to exit codes:
input problems (``ConfigurationError``, ``ParseError``, ``ValidationError``)
and numerical failures (everything deriving from ``NumericalError``).
"""

from __future__ import annotations

from typing import Any


class GengeomError(Exception):
    """Base class. ``payload`` is a JSON-serializable dict of context."""

    kind = "error"

    def __init__(self, message: str, **payload: Any):
        super().__init__(message)
        self.message = message
        self.payload = payload

    def to_json(self) -> dict:
        out = {"error": self.kind, "message": self.message}
        out.update({k: _jsonable(v) for k, v in self.payload.items()})
        return out


class ConfigurationError(GengeomError):
    kind = "configuration"


class ValidationError(GengeomError):
    kind = "validation"


class ParseError(ValidationError):
    kind = "syntax"

    def __init__(self, message: str, text: str = "", position: int = 0):
        super().__init__(f"{message} at position {position}", text=text, position=position)
        self.position = position


class NumericalError(GengeomError):
    kind = "numerical"


class EvaluationError(NumericalError):
    kind = "evaluation"


class DifferentiationError(ValidationError):
    kind = "differentiation"


class SingularityError(NumericalError):
    kind = "singularity"


class IntegrationError(NumericalError):
    kind = "integration"


class StiffnessError(IntegrationError):
    kind = "stiffness"


class BlowUpError(IntegrationError):
    kind = "blow-up"


class QuadratureError(NumericalError):
    kind = "quadrature"


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (str, int, bool)) or value is None:
        return value
    try:
        return float(value)
    except (TypeError, ValueError):
        return repr(value)
