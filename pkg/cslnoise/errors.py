"""Exception hierarchy.

Every error carries the CLI exit code it maps to and a JSON-ready payload.
"""

from __future__ import annotations

from typing import Any, Dict, Optional


class CSLNoiseError(Exception):
    exit_code: int = 1

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = dict(details or {})

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": type(self).__name__,
            "message": self.message,
            "exit_code": self.exit_code,
            "details": self.details,
        }


class PreconditionError(CSLNoiseError):
    """Invalid input, schema violation or unphysical request."""

    exit_code = 2


class UnitError(PreconditionError):
    pass


class NumericalError(CSLNoiseError):
    """A numerical procedure failed to deliver a trustworthy result."""

    exit_code = 3


class FitError(NumericalError):
    pass


class QuadratureError(NumericalError):
    pass


class RingdownError(PreconditionError):
    """Ringdown record without a usable decay (too noisy or not decaying)."""


def require(condition: bool, message: str, **details: Any) -> None:
    if not condition:
        raise PreconditionError(message, details=details or None)
