"""Deterministic batch mechanisms over a two-asset pool.

Four mechanisms share the signature (curve, pool, batch, tol) -> BatchResult:

  null_mechanism        does nothing; every order gets (0, 0).

  mechanism1            second-price style top-order fill. Keeps only
                        demand-side orders (buy_x / sell_y) at or above the
                        market rate, ranks them by declared rate, and fills
                        only the top order: at least the volume x whose
                        average price equals the runner-up rate, at most
                        the volume x' where the marginal price reaches the
                        top order's own rate (capped by its quantity or
                        budget). Everyone pays through the curve, so the
                        single executed order trades at one rate.

  mechanism2            uniform-price batch clearing over all four order
                        types. Finds a clearing rate r* at which demand at
                        the batch price equals supply plus the pool's own
                        contribution, then fills every order at the single
                        batch price p(r*); the marginal rate class is
                        rationed pro-rata.

  single_side_uniform   the all-buy_x special case of uniform-price
                        clearing, solved directly from the demand step
                        function D(r) = sum of quantities with rate >= r.

Clearing search: the candidate rate r0 (current market rate) is tested
first; otherwise the sorted distinct declared rates on the deficient side
are scanned outward from r0, and an interior crossing between two
consecutive candidates is resolved by bisection (the set memberships are
constant on the open interval, so the imbalance function is continuous
and monotone there).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Sequence

from .amm_core import (
    Curve,
    PoolState,
    apply_net_flow,
    marginal_rate,
    x_for_avg_rate,
    x_for_end_rate,
    x_of_y,
    y_of_x,
)
from .numerics import DEFAULT_TOLERANCES, INF_RATE, ExtRate, Tolerances, bisect_monotone
from .orders import BatchResult, Order, OrderType, Outcome, ZERO_OUTCOME


class MechanismError(RuntimeError):
    """Base class for mechanism execution failures."""


class NoSolutionError(MechanismError):
    """No clearing rate exists (unbounded demand against finite reserves)."""


class UnsupportedOrderError(MechanismError):
    """The mechanism does not accept this order type."""


class MechanismId(enum.Enum):
    NULL = "null"
    M1_IC_UP = "m1"
    M2_UP_WLE = "m2"
    SINGLE_SIDE_UNIFORM = "ssu"


@dataclass(frozen=True)
class ClearingSolution:
    """A uniform clearing point: rate r*, batch price, pool flow, branch.

    branch "a" means r* >= r0 with the pool selling delta_x >= 0 units of
    X; branch "b" means r* <= r0 with the pool buying -delta_x units.
    """

    r_star: float
    p_bar: float
    delta_x: float
    branch: str


Mechanism = Callable[[Curve, PoolState, Sequence[Order], Tolerances], BatchResult]


def null_mechanism(curve: Curve, pool: PoolState, batch: Sequence[Order],
                   tol: Tolerances = DEFAULT_TOLERANCES) -> BatchResult:
    """Execute nothing; trivially well-formed."""
    return BatchResult.build([ZERO_OUTCOME] * len(batch), pool, None)


# --- Mechanism 1: second-price style top-order fill -------------------------


def mechanism1(curve: Curve, pool: PoolState, batch: Sequence[Order],
               tol: Tolerances = DEFAULT_TOLERANCES) -> BatchResult:
    outcomes = [ZERO_OUTCOME] * len(batch)
    r0 = marginal_rate(curve, pool)

    # Steps 1-2: keep demand-side orders whose rate is at or above market.
    kept = [
        (i, o) for i, o in enumerate(batch)
        if o.otype.demands_x and o.rate >= r0
    ]
    if not kept:
        return BatchResult.build(outcomes, pool, None)

    # Step 4: rank by declared rate, descending; infinite rates first;
    # ties stay in input position (stable sort).
    kept.sort(key=lambda item: (0, 0.0) if item[1].rate.is_infinite
              else (1, -item[1].rate.value))
    top_index, top = kept[0]
    runner_up = kept[1][1].rate if len(kept) >= 2 else None

    if runner_up is not None and runner_up.is_infinite:
        # The required fill volume (average price equal to an infinite
        # runner-up rate) is unattainable, so nobody trades.
        return BatchResult.build(outcomes, pool, None)

    r2 = runner_up.value if runner_up is not None else r0
    x_floor = x_for_avg_rate(curve, pool, r2, tol) if r2 > r0 else 0.0
    x_ceiling = x_for_end_rate(curve, pool, top.rate)

    if top.otype is OrderType.BUY_X:
        cap = top.qty
    else:  # SELL_Y: convert the Y budget into the X it can absorb
        cap = x_of_y(curve, pool.y) - x_of_y(curve, pool.y + top.qty)

    if cap < x_floor:
        # Step 5c: the top order cannot absorb the mandated volume.
        return BatchResult.build(outcomes, pool, None)

    x_star = max(x_floor, min(x_ceiling, cap))
    if x_star <= 0.0:
        return BatchResult.build(outcomes, pool, None)

    charge = y_of_x(curve, pool.x - x_star) - pool.y
    outcomes[top_index] = Outcome(x_star, -charge)
    end_pool = apply_net_flow(curve, pool, x_star, -charge, tol)
    return BatchResult.build(outcomes, end_pool, charge / x_star)


# --- Mechanism 2: uniform-price clearing over all order types ---------------


def _x_quantity(order: Order, price: float) -> float:
    """Order quantity converted to X units at batch price `price`.

    X-denominated types pass through; Y-denominated types convert via the
    price (an infinite-rate sell_y still divides by the finite price).
    """
    if order.otype in (OrderType.BUY_X, OrderType.SELL_X):
        return order.qty
    return order.qty / price


def solve_clearing_rate(curve: Curve, pool: PoolState,
                        demand: Sequence[Order], supply: Sequence[Order],
                        tol: Tolerances = DEFAULT_TOLERANCES) -> ClearingSolution:
    """Find the uniform clearing rate for pre-filtered demand/supply sets.

    Preconditions: every demand order (buy_x / sell_y) has rate >= r0 and
    every supply order (sell_x / buy_y) has a finite rate <= r0.

    The clearing conditions, with Q(A, p) the X-quantity of order set A at
    batch price p, dx(r) the pool's X outflow when its marginal rate moves
    to r, and p(r) the average price of that move:

      (a) Q(demand above r) <= Q(all supply at or below r) + dx(r)
                            <= Q(demand at or above r),   with r >= r0
      (b) Q(supply below r) <= Q(demand at or above r) - dx(r)
                            <= Q(supply at or below r),   with r <= r0
    """
    x0 = pool.x
    r0 = marginal_rate(curve, pool)

    def pool_end_x(r: float) -> float:
        return curve.x_at_marginal_rate(r, tol)

    def p_bar(r: float) -> float:
        if r == r0:
            return r0
        return curve.chord_rate(x0, pool_end_x(r))

    def delta_x(r: float) -> float:
        if r == r0:
            return 0.0
        return x0 - pool_end_x(r)

    def q_demand_gt(r: float, p: float) -> float:
        return sum(_x_quantity(o, p) for o in demand if o.rate > r)

    def q_demand_ge(r: float, p: float) -> float:
        return sum(_x_quantity(o, p) for o in demand if o.rate >= r)

    def q_supply_lt(r: float, p: float) -> float:
        return sum(_x_quantity(o, p) for o in supply if o.rate < r)

    def q_supply_le(r: float, p: float) -> float:
        return sum(_x_quantity(o, p) for o in supply if o.rate <= r)

    def cond_a(r: float) -> bool:
        p = p_bar(r)
        mid = q_supply_le(r, p) + delta_x(r)
        return q_demand_gt(r, p) <= mid <= q_demand_ge(r, p)

    def cond_b(r: float) -> bool:
        p = p_bar(r)
        mid = q_demand_ge(r, p) - delta_x(r)
        return q_supply_lt(r, p) <= mid <= q_supply_le(r, p)

    def solution(r: float, branch: str) -> ClearingSolution:
        return ClearingSolution(r, p_bar(r), delta_x(r), branch)

    if cond_a(r0):
        return solution(r0, "a")
    if cond_b(r0):
        return solution(r0, "b")

    excess_demand = q_demand_gt(r0, r0) > q_supply_le(r0, r0)

    if excess_demand:
        # Imbalance at rate r: supply plus pool outflow minus strict demand.
        def gap(r: float) -> float:
            p = p_bar(r)
            return q_supply_le(r, p) + delta_x(r) - q_demand_gt(r, p)

        candidates = sorted({o.rate.value for o in demand
                             if not o.rate.is_infinite and o.rate.value > r0})
        prev = r0
        for r_i in candidates:
            if gap(r_i) >= 0.0:
                if cond_a(r_i):
                    return solution(r_i, "a")
                root = bisect_monotone(gap, prev, r_i, 0.0, tol)
                return solution(root, "a")
            prev = r_i
        # Only infinite-rate demand remains above the last candidate;
        # extend the bracket upward until the pool plus supply cover it.
        hi = 2.0 * prev
        for _ in range(4096):
            if gap(hi) >= 0.0:
                root = bisect_monotone(gap, prev, hi, 0.0, tol)
                return solution(root, "a")
            prev, hi = hi, 2.0 * hi
        raise NoSolutionError(
            "unbounded demand cannot be cleared against finite reserves"
        )

    # Excess supply: mirror search below r0.
    def gap_b(r: float) -> float:
        p = p_bar(r)
        return q_demand_ge(r, p) - delta_x(r) - q_supply_lt(r, p)

    candidates = sorted({o.rate.value for o in supply if o.rate.value < r0},
                        reverse=True)
    prev = r0
    for r_i in candidates:
        if gap_b(r_i) >= 0.0:
            if cond_b(r_i):
                return solution(r_i, "b")
            root = bisect_monotone(gap_b, r_i, prev, 0.0, tol)
            return solution(root, "b")
        prev = r_i
    raise NoSolutionError("excess supply with no feasible clearing rate")


def mechanism2(curve: Curve, pool: PoolState, batch: Sequence[Order],
               tol: Tolerances = DEFAULT_TOLERANCES) -> BatchResult:
    outcomes = [ZERO_OUTCOME] * len(batch)
    r0 = marginal_rate(curve, pool)

    # Step 1: drop demand below market and supply above market.
    demand = [(i, o) for i, o in enumerate(batch)
              if o.otype.demands_x and o.rate >= r0]
    supply = [(i, o) for i, o in enumerate(batch)
              if o.otype.supplies_x and o.rate <= r0]

    sol = solve_clearing_rate(curve, pool,
                              [o for _, o in demand], [o for _, o in supply], tol)
    p = sol.p_bar
    r_star = sol.r_star

    fills: dict[int, float] = {}

    def fill_pro_rata(marginal: list[tuple[int, Order]], residual: float) -> None:
        total = sum(_x_quantity(o, p) for _, o in marginal)
        if total <= 0.0:
            return
        residual = min(max(residual, 0.0), total)
        for i, o in marginal:
            fills[i] = residual * (_x_quantity(o, p) / total)

    if sol.branch == "a":
        full_demand = [(i, o) for i, o in demand if o.rate > r_star]
        marginal_demand = [(i, o) for i, o in demand if o.rate == r_star]
        for i, o in supply:  # rate <= r0 <= r*: every supply order fills
            fills[i] = _x_quantity(o, p)
        for i, o in full_demand:
            fills[i] = _x_quantity(o, p)
        supplied = sum(_x_quantity(o, p) for _, o in supply) + sol.delta_x
        residual = supplied - sum(_x_quantity(o, p) for _, o in full_demand)
        fill_pro_rata(marginal_demand, residual)
    else:
        full_supply = [(i, o) for i, o in supply if o.rate < r_star]
        marginal_supply = [(i, o) for i, o in supply if o.rate == r_star]
        for i, o in demand:  # rate >= r0 >= r*: every demand order fills
            fills[i] = _x_quantity(o, p)
        for i, o in full_supply:
            fills[i] = _x_quantity(o, p)
        demanded = sum(_x_quantity(o, p) for _, o in demand) - sol.delta_x
        residual = demanded - sum(_x_quantity(o, p) for _, o in full_supply)
        fill_pro_rata(marginal_supply, residual)

    for i, order in enumerate(batch):
        filled = fills.get(i, 0.0)
        if filled <= 0.0:
            continue
        if order.otype.demands_x:
            outcomes[i] = Outcome(filled, -filled * p)
        else:
            outcomes[i] = Outcome(-filled, filled * p)

    x_tot = sum(out.dx for out in outcomes)
    y_tot = sum(out.dy for out in outcomes)
    end_pool = apply_net_flow(curve, pool, x_tot, y_tot, tol)
    return BatchResult.build(outcomes, end_pool, p)


# --- Single-side uniform clearing (all buy_x) --------------------------------


def single_side_uniform(curve: Curve, pool: PoolState, batch: Sequence[Order],
                        tol: Tolerances = DEFAULT_TOLERANCES) -> BatchResult:
    """Uniform-price clearing for a batch consisting solely of buy_x orders.

    Finds the volume x* at which the demand still priced in at the end
    marginal rate exactly equals x*, fills rates strictly above that end
    rate in full and the rate equal to it pro-rata, and charges everyone
    the uniform average price of the x* purchase.
    """
    for order in batch:
        if order.otype is not OrderType.BUY_X:
            raise UnsupportedOrderError(
                f"single_side_uniform accepts only buy_x orders, got {order.otype}"
            )
    outcomes = [ZERO_OUTCOME] * len(batch)
    r0 = marginal_rate(curve, pool)
    active = [(i, o) for i, o in enumerate(batch) if o.rate >= r0]
    if not active:
        return BatchResult.build(outcomes, pool, None)

    # Rate levels scanned ascending; INF_RATE last if any order carries it.
    levels = [ExtRate.finite(v) for v in
              sorted({o.rate.value for _, o in active if not o.rate.is_infinite})]
    if any(o.rate.is_infinite for _, o in active):
        levels.append(INF_RATE)

    def demand_above(level: ExtRate) -> float:
        return sum(o.qty for _, o in active if o.rate > level)

    def demand_at_or_above(level: ExtRate) -> float:
        return sum(o.qty for _, o in active if o.rate >= level)

    x_star = pivot = None
    boundary = False
    for level in levels:
        cap = x_for_end_rate(curve, pool, level)
        if demand_above(level) <= cap:
            if cap <= demand_at_or_above(level):
                if level.is_infinite:
                    raise NoSolutionError(
                        "unbounded-rate demand exceeds the pool reserve"
                    )
                x_star, pivot, boundary = cap, level, True
            else:
                # Plateau: everything at or above this level fills fully and
                # the end rate lands strictly between declared levels.
                x_star, pivot, boundary = demand_at_or_above(level), level, False
            break
    assert x_star is not None and pivot is not None  # scan always terminates

    if x_star <= 0.0:
        return BatchResult.build(outcomes, pool, None)

    price = curve.chord_rate(pool.x, pool.x - x_star)
    residual = x_star - demand_above(pivot)
    marginal_total = sum(o.qty for _, o in active if o.rate == pivot)
    for i, o in active:
        if o.rate > pivot or (not boundary and o.rate == pivot):
            fill = o.qty
        elif boundary and o.rate == pivot and marginal_total > 0.0:
            fill = min(max(residual, 0.0), marginal_total) * (o.qty / marginal_total)
        else:
            continue
        outcomes[i] = Outcome(fill, -fill * price)

    x_tot = sum(out.dx for out in outcomes)
    y_tot = sum(out.dy for out in outcomes)
    end_pool = apply_net_flow(curve, pool, x_tot, y_tot, tol)
    return BatchResult.build(outcomes, end_pool, price)


_MECHANISMS: dict[MechanismId, Mechanism] = {
    MechanismId.NULL: null_mechanism,
    MechanismId.M1_IC_UP: mechanism1,
    MechanismId.M2_UP_WLE: mechanism2,
    MechanismId.SINGLE_SIDE_UNIFORM: single_side_uniform,
}


def get_mechanism(mid: MechanismId | str) -> Mechanism:
    if isinstance(mid, str):
        mid = MechanismId(mid)
    return _MECHANISMS[mid]
