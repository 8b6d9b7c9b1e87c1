"""Pool state and the rate algebra of the pricing curve.

For a curve with potential constant C, write Y(X) for the unique Y with
potential(X, Y) = C. The quantities used everywhere downstream:

    marginal rate          r(X)       = -dY/dX at the pool's X
    average buy rate       r_avg(x)   = (Y(X0 - x) - Y0) / x,  r_avg(0) = r(X0)
    end rate               r_end(x)   = -dY/dX at X0 - x

For the constant product curve (potential X*Y = C) these have closed
forms:  Y(X) = C/X,  r(X) = C/X^2,  r_avg(x) = C/(X0*(X0-x)),
r_end(x) = C/(X0-x)^2, and the inverses  x_for_avg_rate(r) = X0 - C/(r*X0),
x_for_end_rate(r) = X0 - sqrt(C/r).

Everything here is a pure function of immutable values. The Curve
abstraction exists so a second increasing/differentiable/concave curve can
be added without touching the mechanisms; only the three primitives
(y_of_x, x_of_y, minus_dy_dx) are mandatory, the rest default to
bisection-based fallbacks.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

from .numerics import (
    DEFAULT_TOLERANCES,
    ExtRate,
    Tolerances,
    bisect_monotone,
)


class CurveDomainError(ValueError):
    """An argument lies outside the curve operation's domain."""


class ConformanceError(ValueError):
    """A proposed pool transition drifts off the potential level set."""


class ReserveError(ValueError):
    """A proposed flow would empty or overdraw a reserve."""


# Guard fraction used when an infinite-rate demand must be capped at the
# largest admissible withdrawal (reserve minus guard * reserve).
_INF_WITHDRAWAL_GUARD = 1e-12


@dataclass(frozen=True)
class PoolState:
    """Reserves of assets X and Y; both strictly positive."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (self.x > 0.0 and self.y > 0.0):
            raise ValueError(f"reserves must be strictly positive, got {self}")


class Curve(ABC):
    """An increasing, differentiable, concave pricing potential.

    Subclasses must provide the constant ``c`` plus the three primitives.
    Default inverse solvers use monotone bisection; override them with
    closed forms where the curve permits.
    """

    c: float

    @abstractmethod
    def potential(self, x: float, y: float) -> float:
        """Value of the potential at reserves (x, y)."""

    @abstractmethod
    def y_of_x(self, x: float) -> float:
        """Y(X): the unique y with potential(x, y) = c. Requires x > 0."""

    @abstractmethod
    def x_of_y(self, y: float) -> float:
        """X(Y): inverse of y_of_x. Requires y > 0."""

    @abstractmethod
    def minus_dy_dx(self, x: float) -> float:
        """-dY/dX at reserve x; strictly decreasing in x."""

    def chord_rate(self, x_from: float, x_to: float) -> float:
        """Average rate (Y(x_to) - Y(x_from)) / (x_from - x_to).

        Positive for any x_to != x_from; falls back to the marginal rate
        as the points coincide. Subclasses should override with a
        cancellation-free form.
        """
        if x_to == x_from:
            return self.minus_dy_dx(x_from)
        return (self.y_of_x(x_to) - self.y_of_x(x_from)) / (x_from - x_to)

    def x_at_marginal_rate(self, rate: float, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
        """Reserve level x where -dY/dX(x) = rate. Defined for every rate > 0."""
        if rate <= 0.0:
            raise CurveDomainError(f"rate must be positive, got {rate}")
        lo = hi = 1.0
        while self.minus_dy_dx(lo) < rate:
            lo /= 2.0
        while self.minus_dy_dx(hi) > rate:
            hi *= 2.0
        return bisect_monotone(self.minus_dy_dx, lo, hi, rate, tol)


@dataclass(frozen=True)
class ConstantProduct(Curve):
    """Constant product curve: potential(x, y) = x * y = c."""

    c: float

    def __post_init__(self) -> None:
        if not self.c > 0.0:
            raise ValueError(f"potential constant must be positive, got {self.c}")

    @classmethod
    def from_pool(cls, pool: PoolState) -> "ConstantProduct":
        return cls(pool.x * pool.y)

    def potential(self, x: float, y: float) -> float:
        return x * y

    def y_of_x(self, x: float) -> float:
        if x <= 0.0:
            raise CurveDomainError(f"x must be positive, got {x}")
        return self.c / x

    def x_of_y(self, y: float) -> float:
        if y <= 0.0:
            raise CurveDomainError(f"y must be positive, got {y}")
        return self.c / y

    def minus_dy_dx(self, x: float) -> float:
        if x <= 0.0:
            raise CurveDomainError(f"x must be positive, got {x}")
        return self.c / (x * x)

    def chord_rate(self, x_from: float, x_to: float) -> float:
        # (c/x_to - c/x_from) / (x_from - x_to) simplifies to c/(x_from*x_to),
        # which is exact even when x_to is within rounding of x_from.
        return self.c / (x_from * x_to)

    def x_at_marginal_rate(self, rate: float, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
        if rate <= 0.0:
            raise CurveDomainError(f"rate must be positive, got {rate}")
        return math.sqrt(self.c / rate)


def y_of_x(curve: Curve, x: float) -> float:
    """Y(X) on the curve's level set."""
    return curve.y_of_x(x)


def x_of_y(curve: Curve, y: float) -> float:
    """X(Y), the inverse of y_of_x."""
    return curve.x_of_y(y)


def marginal_rate(curve: Curve, pool: PoolState) -> float:
    """-dY/dX at the pool's X: the market rate for an infinitesimal buy."""
    return curve.minus_dy_dx(pool.x)


def avg_buy_rate(curve: Curve, pool: PoolState, x: float) -> float:
    """Average price per unit for buying x units of X from the pool.

    Defined as (Y(X0-x) - Y0)/x for x > 0 and as the marginal rate at
    x = 0; strictly increasing in x.
    """
    if x < 0.0 or x >= pool.x:
        raise CurveDomainError(f"need 0 <= x < reserve ({pool.x}), got {x}")
    if x == 0.0:
        return curve.minus_dy_dx(pool.x)
    return curve.chord_rate(pool.x, pool.x - x)


def end_rate(curve: Curve, pool: PoolState, x: float) -> float:
    """Marginal rate after buying x units of X; exceeds avg_buy_rate for x > 0."""
    if x < 0.0 or x >= pool.x:
        raise CurveDomainError(f"need 0 <= x < reserve ({pool.x}), got {x}")
    return curve.minus_dy_dx(pool.x - x)


def x_for_avg_rate(curve: Curve, pool: PoolState, rate: float,
                   tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """The unique volume x > 0 with avg_buy_rate(x) = rate.

    Requires rate strictly above the current marginal rate.
    """
    r0 = curve.minus_dy_dx(pool.x)
    if rate <= r0:
        raise CurveDomainError(f"rate {rate} must exceed marginal rate {r0}")
    if isinstance(curve, ConstantProduct):
        return pool.x - curve.c / (rate * pool.x)
    hi = pool.x * (1.0 - _INF_WITHDRAWAL_GUARD)
    return bisect_monotone(lambda v: avg_buy_rate(curve, pool, v), 0.0, hi, rate, tol)


def x_for_end_rate(curve: Curve, pool: PoolState, rate: ExtRate | float) -> float:
    """The volume x with end_rate(x) = rate.

    An infinite rate returns the largest admissible withdrawal (reserve
    minus a guard fraction of the reserve), which acts as an open demand
    cap for callers taking min(x', q).
    """
    if isinstance(rate, ExtRate) and rate.is_infinite:
        return pool.x * (1.0 - _INF_WITHDRAWAL_GUARD)
    r = rate.value if isinstance(rate, ExtRate) else float(rate)
    r0 = curve.minus_dy_dx(pool.x)
    if r < r0:
        raise CurveDomainError(f"rate {r} below marginal rate {r0}")
    return pool.x - curve.x_at_marginal_rate(r)


def apply_net_flow(curve: Curve, pool: PoolState, x_tot: float, y_tot: float,
                   tol: Tolerances = DEFAULT_TOLERANCES) -> PoolState:
    """Move the pool by users' aggregate net gains (x_tot, y_tot).

    Returns (X0 - x_tot, Y0 - y_tot) after asserting the potential is
    preserved to within tol_audit relative drift.
    """
    new_x = pool.x - x_tot
    new_y = pool.y - y_tot
    if new_x <= 0.0 or new_y <= 0.0:
        raise ReserveError(
            f"flow ({x_tot}, {y_tot}) would deplete reserves {pool}"
        )
    drift = abs(curve.potential(new_x, new_y) - curve.c) / curve.c
    if drift > tol.tol_audit:
        raise ConformanceError(
            f"potential drift {drift:.3e} exceeds tolerance {tol.tol_audit:.3e}"
        )
    return PoolState(new_x, new_y)


def uniform_payment_gradient(curve: Curve, pool: PoolState, a1: float, a2: float) -> float:
    """Marginal Y-payment of the first buyer under uniform-average pricing.

    When a total of a1 + a2 units is bought at the uniform average rate and
    the first buyer takes a1 of them, the derivative of their payment with
    respect to a1 is the convex combination

        (a1/(a1+a2)) * r_end(a1+a2) + (a2/(a1+a2)) * r_avg(a1+a2).

    The partner derivative (second buyer w.r.t. a2) is obtained by swapping
    the arguments.
    """
    if a1 < 0.0 or a2 < 0.0:
        raise CurveDomainError(f"allocations must be nonnegative, got ({a1}, {a2})")
    total = a1 + a2
    if total <= 0.0:
        raise CurveDomainError("total allocation must be positive")
    if total >= pool.x:
        raise CurveDomainError(f"total allocation {total} must stay below reserve {pool.x}")
    r_end_v = end_rate(curve, pool, total)
    r_avg_v = avg_buy_rate(curve, pool, total)
    return (a1 * r_end_v + a2 * r_avg_v) / total
