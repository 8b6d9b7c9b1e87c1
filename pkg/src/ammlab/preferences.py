"""Utility rankings over outcomes.

Sell types carry a total order: quasilinear utility x*r + y whenever the
outcome stays within the declared sale budget, -infinity otherwise.

Buy types carry a partial order built from two quasilinear comparisons:
one valuing every received unit at the limit rate, one capping the valued
quantity at the declared demand (zero marginal value beyond it). An
outcome dominates only if both comparisons agree; when they disagree the
outcomes are incomparable, because the intrinsic type does not pin down
the value of units beyond the declared demand.

A strategic player posting several orders is judged on the summed joint
outcome; callers combine Outcomes with ``+`` before comparing.
"""

from __future__ import annotations

import enum
import math

from .numerics import ExtRate
from .orders import IntrinsicType, Order, OrderType, Outcome


class PrefResult(enum.Enum):
    STRICTLY_WORSE = "strictly_worse"
    EQUIVALENT = "equivalent"
    STRICTLY_BETTER = "strictly_better"
    INCOMPARABLE = "incomparable"


def sell_utility(t: IntrinsicType, out: Outcome) -> float:
    """Quasilinear utility of a sell-type intrinsic type, -inf past budget."""
    if t.otype is OrderType.SELL_X:
        if -out.dx > t.qty:
            return -math.inf
    elif t.otype is OrderType.SELL_Y:
        if -out.dy > t.qty:
            return -math.inf
    else:
        raise TypeError(f"sell_utility requires a sell type, got {t.otype}")
    return _linear_value(t.rate, out.dx, out.dy)


def _linear_value(rate: ExtRate, dx: float, dy: float) -> float:
    # x*r + y with explicit handling of the infinite-rate variant: the X
    # term dominates unless it vanishes.
    if rate.is_infinite:
        if dx > 0.0:
            return math.inf
        if dx < 0.0:
            return -math.inf
        return dy
    return dx * rate.value + dy


def _cmp_linear(rate: ExtRate, dx0: float, dy0: float, dx1: float, dy1: float,
                eps: float) -> int:
    """Sign of value(outcome1) - value(outcome0), with eps dead-band.

    For an infinite rate the comparison is lexicographic in (dx, dy).
    """
    if rate.is_infinite:
        if abs(dx1 - dx0) > eps:
            return 1 if dx1 > dx0 else -1
        if abs(dy1 - dy0) > eps:
            return 1 if dy1 > dy0 else -1
        return 0
    v0 = dx0 * rate.value + dy0
    v1 = dx1 * rate.value + dy1
    if v1 > v0 + eps:
        return 1
    if v1 < v0 - eps:
        return -1
    return 0


def _cmp_sell(t: IntrinsicType, o0: Outcome, o1: Outcome, eps: float) -> int:
    u0 = sell_utility(t, o0)
    u1 = sell_utility(t, o1)
    if u0 == u1:  # covers the both-infeasible -inf tie
        return 0
    if math.isinf(u0) or math.isinf(u1):
        return 1 if u1 > u0 else -1
    if u1 > u0 + eps:
        return 1
    if u1 < u0 - eps:
        return -1
    return 0


def compare(t: IntrinsicType, o0: Outcome, o1: Outcome, eps: float = 0.0) -> PrefResult:
    """Rank outcome o1 against outcome o0 under intrinsic type t.

    Returns STRICTLY_BETTER when o1 is strictly preferred, EQUIVALENT when
    the defining comparisons all hold with equality, INCOMPARABLE when the
    two buy-type comparisons disagree in direction. Sell types never
    return INCOMPARABLE. ``eps`` is an absolute dead-band: differences
    within eps count as ties.
    """
    if t.otype in (OrderType.SELL_X, OrderType.SELL_Y):
        c = _cmp_sell(t, o0, o1, eps)
        if c > 0:
            return PrefResult.STRICTLY_BETTER
        if c < 0:
            return PrefResult.STRICTLY_WORSE
        return PrefResult.EQUIVALENT

    if t.otype is OrderType.BUY_X:
        c_full = _cmp_linear(t.rate, o0.dx, o0.dy, o1.dx, o1.dy, eps)
        c_capped = _cmp_linear(
            t.rate, min(o0.dx, t.qty), o0.dy, min(o1.dx, t.qty), o1.dy, eps
        )
    else:  # BUY_Y: cap the valued quantity of Y at the declared demand
        c_full = _cmp_linear(t.rate, o0.dx, o0.dy, o1.dx, o1.dy, eps)
        c_capped = _cmp_linear(
            t.rate, o0.dx, min(o0.dy, t.qty), o1.dx, min(o1.dy, t.qty), eps
        )

    if c_full >= 0 and c_capped >= 0:
        if c_full > 0 or c_capped > 0:
            return PrefResult.STRICTLY_BETTER
        return PrefResult.EQUIVALENT
    if c_full <= 0 and c_capped <= 0:
        return PrefResult.STRICTLY_WORSE
    return PrefResult.INCOMPARABLE


def joint_outcome(outcomes: list[Outcome]) -> Outcome:
    """Sum componentwise; the joint outcome of one player's order set."""
    total = Outcome(0.0, 0.0)
    for out in outcomes:
        total = total + out
    return total
