"""Scalar policy shared by every other module: tolerances, extended
(finite-or-infinite) exchange rates, and deterministic monotone bisection.

All scalars are binary64 floats. Infinity is a first-class variant of
``ExtRate``, never a float sentinel, so that comparisons against an
unbounded rate cannot depend on float overflow behavior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union


class BracketError(ValueError):
    """The target value is not bracketed by f(lo) and f(hi)."""


class ConvergenceError(RuntimeError):
    """The iteration cap was reached before meeting tolerance."""


@dataclass(frozen=True)
class Tolerances:
    """Numeric policy knobs.

    tol_root is relative (root finds), tol_audit is absolute slack for
    property comparisons, max_iter caps iterative loops.
    """

    tol_root: float = 1e-12
    tol_audit: float = 1e-7
    max_iter: int = 200

    def __post_init__(self) -> None:
        if not (self.tol_root > 0.0 and self.tol_audit > 0.0):
            raise ValueError("tolerances must be strictly positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


DEFAULT_TOLERANCES = Tolerances()

RateLike = Union["ExtRate", float, int]


@dataclass(frozen=True)
class ExtRate:
    """A strictly positive exchange rate (units: Y per X), or +infinity.

    ``_raw`` is None for the infinite variant. Infinity compares greater
    than every finite rate.
    """

    _raw: float | None = None

    @classmethod
    def finite(cls, value: float) -> "ExtRate":
        value = float(value)
        if not math.isfinite(value) or value <= 0.0:
            raise ValueError(f"finite rate must be > 0 and finite, got {value!r}")
        return cls(value)

    @classmethod
    def infinite(cls) -> "ExtRate":
        return cls(None)

    @classmethod
    def coerce(cls, value: RateLike | str) -> "ExtRate":
        """Normalize a boundary value (float, int, 'inf', math.inf) to ExtRate."""
        if isinstance(value, ExtRate):
            return value
        if isinstance(value, str):
            if value == "inf":
                return cls.infinite()
            raise ValueError(f"unrecognized rate string {value!r}")
        if isinstance(value, (int, float)):
            if math.isinf(value) and value > 0:
                return cls.infinite()
            return cls.finite(float(value))
        raise TypeError(f"cannot coerce {type(value).__name__} to ExtRate")

    @property
    def is_infinite(self) -> bool:
        return self._raw is None

    @property
    def value(self) -> float:
        if self._raw is None:
            raise ValueError("infinite rate has no finite value")
        return self._raw

    def _key(self) -> tuple[int, float]:
        # Infinity sorts above every finite value.
        return (1, 0.0) if self._raw is None else (0, self._raw)

    @staticmethod
    def _other_key(other: RateLike) -> tuple[int, float]:
        if isinstance(other, ExtRate):
            return other._key()
        if isinstance(other, (int, float)):
            if math.isinf(other) and other > 0:
                return (1, 0.0)
            return (0, float(other))
        return NotImplemented  # type: ignore[return-value]

    def __lt__(self, other: RateLike) -> bool:
        key = self._other_key(other)
        if key is NotImplemented:
            return NotImplemented
        return self._key() < key

    def __le__(self, other: RateLike) -> bool:
        key = self._other_key(other)
        if key is NotImplemented:
            return NotImplemented
        return self._key() <= key

    def __gt__(self, other: RateLike) -> bool:
        key = self._other_key(other)
        if key is NotImplemented:
            return NotImplemented
        return self._key() > key

    def __ge__(self, other: RateLike) -> bool:
        key = self._other_key(other)
        if key is NotImplemented:
            return NotImplemented
        return self._key() >= key

    def to_json(self) -> float | str:
        return "inf" if self._raw is None else self._raw

    def __repr__(self) -> str:
        return "ExtRate(inf)" if self._raw is None else f"ExtRate({self._raw!r})"


INF_RATE = ExtRate.infinite()


def bisect_monotone(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    target: float,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> float:
    """Solve f(x) = target on [lo, hi] for monotone f by pure bisection.

    Deterministic: fixed midpoint rule, no secant or interpolation steps,
    so two calls with identical inputs return bit-identical results.

    Raises BracketError if target lies outside [f(lo), f(hi)] after
    orientation, ConvergenceError if max_iter is exhausted.
    """
    if not (lo <= hi):
        raise ValueError(f"invalid interval [{lo}, {hi}]")
    band = tol.tol_root * max(1.0, abs(target))
    f_lo, f_hi = f(lo), f(hi)
    increasing = f_hi >= f_lo
    f_min, f_max = (f_lo, f_hi) if increasing else (f_hi, f_lo)
    if target < f_min - band or target > f_max + band:
        raise BracketError(
            f"target {target} not bracketed by f values [{f_min}, {f_max}]"
        )
    if abs(f_lo - target) <= band:
        return lo
    if abs(f_hi - target) <= band:
        return hi

    for _ in range(tol.max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if abs(f_mid - target) <= band:
            return mid
        if mid == lo or mid == hi:
            # Interval collapsed to adjacent floats; cannot refine further.
            raise ConvergenceError(
                f"interval exhausted at {mid} with residual {f_mid - target}"
            )
        if (f_mid < target) == increasing:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError(f"no convergence within {tol.max_iter} iterations")
