"""Exception types shared across the laboratory."""

from __future__ import annotations

__all__ = [
    "InvalidParameterError",
    "InvalidInputError",
    "UnsupportedOrderError",
    "SingularPointError",
    "TooLargeError",
    "ResolutionError",
    "NumericFailureError",
]


class InvalidParameterError(ValueError):
    """A constructor or operation parameter is out of its documented range."""


class InvalidInputError(ValueError):
    """Input data is malformed or inconsistent with the operands."""


class UnsupportedOrderError(ValueError):
    """A derivative or Sobolev order outside the supported range was requested."""


class SingularPointError(ValueError):
    """Evaluation was requested at a point where the expression is singular."""


class TooLargeError(ValueError):
    """The requested problem size exceeds the dense-assembly budget."""


class ResolutionError(ValueError):
    """The grid is too coarse for the requested object to be representable."""


class NumericFailureError(RuntimeError):
    """A numerical backend failed to converge or left a large residual."""
