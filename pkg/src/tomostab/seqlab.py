"""Weighted-shift map on truncated sequence space and its zero family.

The map acts on the first M terms of a real sequence x as

    y_k = exp(-k) * x_k - x_k * sum_m x_m / m,        k = 1..M,

a diagonal damping term corrected by a rank-one coupling.  Its interest is
the family x^(k) = k*exp(-k)*e_k of exact zeros whose h^s norms collapse at
wildly different speeds in different orders s, so the ratio of norms between
two orders grows without bound along the family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, InvalidParameterError

__all__ = [
    "DEFAULT_TRUNCATION",
    "SequenceVec",
    "InstabilityRatio",
    "seq_map",
    "seq_linearization_at",
    "counterexample",
    "hs_norm",
    "instability_ratio",
]

DEFAULT_TRUNCATION = 50

# Ratios beyond exp(700) overflow float64; reported via log10 with a flag.
_LOG_OVERFLOW = 700.0


@dataclass(frozen=True)
class SequenceVec:
    """First M entries of a real sequence; index k runs 1..M."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        e = np.asarray(self.entries, dtype=float)
        if e.ndim != 1 or e.size < 1:
            raise InvalidInputError("entries must be a 1-d array with M >= 1")
        if not np.all(np.isfinite(e)):
            raise InvalidInputError("entries must be finite")
        object.__setattr__(self, "entries", e)

    @property
    def truncation(self) -> int:
        return int(self.entries.size)


def _indices(M: int) -> np.ndarray:
    return np.arange(1, M + 1, dtype=float)


def _coupling(x: np.ndarray) -> float:
    # (x, a) with a = {1/k}
    return float(np.sum(x / _indices(x.size)))


def seq_map(x: SequenceVec) -> SequenceVec:
    """Apply the damped rank-one-coupled map entrywise."""
    k = _indices(x.truncation)
    y = np.exp(-k) * x.entries - x.entries * _coupling(x.entries)
    return SequenceVec(entries=y)


def seq_linearization_at(x0: SequenceVec, h: SequenceVec) -> SequenceVec:
    """Directional derivative of :func:`seq_map` at x0 applied to h.

    Closed form: E h - (h, a) x0 - (x0, a) h with E = diag(exp(-k)).
    """
    if x0.truncation != h.truncation:
        raise InvalidInputError(
            f"truncation mismatch: x0 has M={x0.truncation}, h has M={h.truncation}"
        )
    k = _indices(x0.truncation)
    y = (
        np.exp(-k) * h.entries
        - _coupling(h.entries) * x0.entries
        - _coupling(x0.entries) * h.entries
    )
    return SequenceVec(entries=y)


def counterexample(k: int, M: int = DEFAULT_TRUNCATION) -> SequenceVec:
    """The k-th member of the exact zero family: k*exp(-k) at position k."""
    if not 1 <= k <= M:
        raise InvalidParameterError(f"need 1 <= k <= M, got k={k}, M={M}")
    e = np.zeros(M)
    e[k - 1] = k * math.exp(-k)
    return SequenceVec(entries=e)


def hs_norm(x: SequenceVec, s: float) -> float:
    """Weighted norm sqrt(sum k^(2s) x_k^2)."""
    if not np.isfinite(s):
        raise InvalidParameterError(f"order s must be finite, got {s}")
    k = _indices(x.truncation)
    return float(np.sqrt(np.sum(k ** (2.0 * s) * x.entries**2)))


@dataclass(frozen=True)
class InstabilityRatio:
    """Norm ratio of the k-th zero-family member between orders s1 and s2.

    ``value`` is the ratio k^(s1-s2) * exp(k); when it exceeds the float64
    range the value saturates to inf and ``overflowed`` is set, with
    ``log10`` always carrying the exact magnitude.
    """

    k: int
    s1: float
    s2: float
    value: float
    log10: float
    overflowed: bool


def instability_ratio(k: int, s1: float, s2: float) -> InstabilityRatio:
    """Ratio ||x^(k)||_{h^s1} / ||A'(0) x^(k)||_{h^s2} in closed form.

    Evaluates k^(s1-s2) * exp(k) in log space: the numerator norm is
    k^(s1+1) exp(-k) while the diagonal image has norm k^(s2+1) exp(-2k).
    The ratio grows without bound in k (monotonically once k > s2 - s1).
    """
    if k < 1:
        raise InvalidParameterError(f"index k must be >= 1, got {k}")
    log_ratio = (s1 - s2) * math.log(k) + k
    overflow = log_ratio > _LOG_OVERFLOW
    value = math.inf if overflow else math.exp(log_ratio)
    return InstabilityRatio(
        k=k,
        s1=s1,
        s2=s2,
        value=value,
        log10=log_ratio / math.log(10.0),
        overflowed=overflow,
    )
