"""Property checkers: uniform pricing, local efficiency, arbitrage subsets,
and a grid-based strategic-deviation search.

The deviation search is a refuter, not a prover: it enumerates a finite
family of strategies (misreports over a rate/quantity grid, abstention,
split orders, targeted unbounded-rate probes, and, in the plain model,
censorship and reordering) and reports the first one whose joint outcome
the player strictly prefers. A passing report therefore means "no
violation found at this grid", not a proof of incentive compatibility.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from .amm_core import Curve, PoolState, marginal_rate, x_for_avg_rate
from .mechanisms import Mechanism, MechanismError, MechanismId, get_mechanism
from .numerics import DEFAULT_TOLERANCES, INF_RATE, ExtRate, Tolerances
from .orders import (
    BatchResult,
    IntrinsicType,
    Order,
    OrderType,
    Outcome,
    order_to_json,
)
from .preferences import PrefResult, compare
from .reporting import AuditReport

_ARBITRAGE_SIZE_CAP = 22


class StrategyModel(enum.Enum):
    PLAIN = "plain"
    WEAK_FAIR_SEQUENCING = "weak_fair_sequencing"


# --- Outcome-level auditors --------------------------------------------------


def check_uniform_pricing(batch: Sequence[Order], result: BatchResult,
                          tol: Tolerances = DEFAULT_TOLERANCES) -> AuditReport:
    """All executed orders (dx != 0) must trade at one exchange rate."""
    if len(batch) != len(result.outcomes):
        raise ValueError("result is not aligned with batch")
    executed = [(i, -out.dy / out.dx)
                for i, out in enumerate(result.outcomes) if out.dx != 0.0]
    if len(executed) <= 1:
        return AuditReport("uniform_pricing", True)
    lo = min(executed, key=lambda t: t[1])
    hi = max(executed, key=lambda t: t[1])
    if hi[1] - lo[1] > tol.tol_audit:
        return AuditReport(
            "uniform_pricing", False,
            {"orders": [lo[0], hi[0]], "rates": [lo[1], hi[1]]},
        )
    return AuditReport("uniform_pricing", True)


def is_eligible(order: Order, r0: float) -> bool:
    """Demand-side orders are eligible at rate >= r0, supply-side at <= r0.

    An infinite rate is always eligible on the demand side and never on
    the supply side.
    """
    if order.otype.demands_x:
        return order.rate >= r0
    return order.rate <= r0


def _filled_quantity(order: Order, out: Outcome) -> float:
    return {
        OrderType.BUY_X: out.dx,
        OrderType.BUY_Y: out.dy,
        OrderType.SELL_X: -out.dx,
        OrderType.SELL_Y: -out.dy,
    }[order.otype]


def check_local_efficiency(curve: Curve, batch: Sequence[Order],
                           result: BatchResult, weak: bool,
                           tol: Tolerances = DEFAULT_TOLERANCES) -> AuditReport:
    """No unfulfilled order may still want to trade with the ending pool.

    The ending marginal rate must be no smaller than the rate of any
    incompletely filled demand-side order and no larger than the rate of
    any incompletely filled supply-side order. With ``weak`` set, only
    eligible orders (judged against the recovered starting market rate)
    are considered.
    """
    if len(batch) != len(result.outcomes):
        raise ValueError("result is not aligned with batch")
    x_tot = sum(out.dx for out in result.outcomes)
    y_tot = sum(out.dy for out in result.outcomes)
    start_x = result.end_pool.x + x_tot
    start_y = result.end_pool.y + y_tot
    if start_x <= 0.0 or start_y <= 0.0:
        raise ValueError("result flows are inconsistent with any starting pool")
    r0 = curve.minus_dy_dx(start_x)
    r_end = curve.minus_dy_dx(result.end_pool.x)

    name = "weak_local_efficiency" if weak else "local_efficiency"
    violations = []
    for i, (order, out) in enumerate(zip(batch, result.outcomes)):
        if _filled_quantity(order, out) >= order.qty - tol.tol_audit:
            continue
        if weak and not is_eligible(order, r0):
            continue
        if order.otype.demands_x:
            violated = order.rate.is_infinite or r_end < order.rate.value - tol.tol_audit
        else:
            violated = (not order.rate.is_infinite) and r_end > order.rate.value + tol.tol_audit
        if violated:
            violations.append({"order": i, "rate": order.rate.to_json(), "end_rate": r_end})
    if violations:
        return AuditReport(name, False, {"end_rate": r_end, "violations": violations})
    return AuditReport(name, True)


def find_arbitrage_subset(result: BatchResult,
                          tol: Tolerances = DEFAULT_TOLERANCES) -> AuditReport:
    """Search for a subset of orders jointly gaining in both assets.

    Exhaustive over the 2^n subsets (n capped at 22); returns the first
    violating subset in lexicographic index order, e.g. [0] before [0, 1]
    before [1].
    """
    outs = result.outcomes
    n = len(outs)
    if n > _ARBITRAGE_SIZE_CAP:
        raise ValueError(f"batch size {n} exceeds exhaustive-search cap {_ARBITRAGE_SIZE_CAP}")
    slack = tol.tol_audit

    def dfs(prefix: list[int], sum_x: float, sum_y: float, start: int):
        for j in range(start, n):
            sx = sum_x + outs[j].dx
            sy = sum_y + outs[j].dy
            chosen = prefix + [j]
            if sx >= -slack and sy >= -slack and max(sx, sy) > slack:
                yield chosen, sx, sy
            yield from dfs(chosen, sx, sy, j + 1)

    for subset, sx, sy in dfs([], 0.0, 0.0, 0):
        return AuditReport(
            "arbitrage_resilience", False,
            {"subset": subset, "x_gain": sx, "y_gain": sy},
        )
    return AuditReport("arbitrage_resilience", True)


# --- Strategic deviation search ----------------------------------------------


@dataclass(frozen=True)
class DeviationGrid:
    """Finite strategy family explored by the deviation search.

    rate_points and qty_points span single-order misreports (a quantity of
    0 encodes abstention); split orders draw from the coarser sybil_*
    subsamples; include_analytic adds targeted unbounded-rate probes (the
    exact volume whose average price matches a rival's rate, and a tiny
    probe quantity).
    """

    rate_points: tuple[ExtRate, ...]
    qty_points: tuple[float, ...]
    max_sybil: int = 2
    include_analytic: bool = True
    sybil_rate_points: tuple[ExtRate, ...] = ()
    sybil_qty_points: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if not self.rate_points or not self.qty_points:
            raise ValueError("grid requires non-empty rate and quantity lists")
        if self.max_sybil < 1 or self.max_sybil > 2:
            raise ValueError("max_sybil must be 1 or 2")

    @classmethod
    def build(cls, r0: float, ref_qty: float, *, n_rates: int = 21,
              n_qtys: int = 20, rate_lo: float = 0.25, rate_hi: float = 4.0,
              qty_span: float = 1.5, max_sybil: int = 2,
              include_analytic: bool = True) -> "DeviationGrid":
        """Log-spaced rates around the market rate plus an infinite point;
        linear quantities from 0 up to qty_span times the reference demand."""
        lo, hi = math.log(rate_lo * r0), math.log(rate_hi * r0)
        rates = tuple(
            ExtRate.finite(math.exp(lo + (hi - lo) * k / (n_rates - 1)))
            for k in range(n_rates)
        ) + (INF_RATE,)
        span = qty_span * ref_qty if ref_qty > 0 else qty_span
        qtys = (0.0,) + tuple(span * k / n_qtys for k in range(1, n_qtys + 1))
        rate_step = max(1, n_rates // 5)
        qty_step = max(1, n_qtys // 4)
        sybil_rates = rates[::rate_step] + (INF_RATE,)
        sybil_rates = tuple(dict.fromkeys(sybil_rates))
        sybil_qtys = tuple(qtys[1::qty_step])
        return cls(rates, qtys, max_sybil, include_analytic, sybil_rates, sybil_qtys)

    @classmethod
    def preset(cls, name: str, r0: float, ref_qty: float) -> "DeviationGrid":
        sizes = {"coarse": (7, 6), "default": (21, 20), "fine": (41, 40)}
        if name not in sizes:
            raise ValueError(f"unknown grid preset {name!r}")
        n_rates, n_qtys = sizes[name]
        return cls.build(r0, ref_qty, n_rates=n_rates, n_qtys=n_qtys)


@dataclass(frozen=True)
class Deviation:
    """One strategic play: the player's posted orders, their insertion
    position among the surviving rivals, and the censored rival indices."""

    orders: tuple[Order, ...]
    position: int
    censored: frozenset[int] = frozenset()
    label: str = ""

    def describe(self) -> dict:
        return {
            "orders": [order_to_json(o) for o in self.orders],
            "position": self.position,
            "censored": sorted(self.censored),
            "label": self.label,
        }


def _arrival_sorted(others: Sequence[Order]) -> tuple[list[Order], list[float]]:
    """Rivals in arrival order; a missing aux defaults to the input index."""
    keyed = sorted(
        ((o.aux if o.aux is not None else float(i), i, o)
         for i, o in enumerate(others)),
        key=lambda t: (t[0], t[1]),
    )
    return [o for _, _, o in keyed], [k for k, _, _ in keyed]


def honest_strategy(t: IntrinsicType) -> tuple[Order, ...]:
    """Truthful revelation; a zero-demand type posts nothing."""
    if t.qty <= 0.0:
        return ()
    return (Order(t.otype, t.rate, t.qty, t.aux),)


def _allowed_positions(model: StrategyModel, aux_sorted: list[float],
                       player_aux: float) -> list[int]:
    n = len(aux_sorted)
    if model is StrategyModel.PLAIN:
        return list(range(n + 1))
    # Weak fair sequencing: the player may only delay, so it can land at
    # or after its honest arrival slot.
    earliest = sum(1 for a in aux_sorted if a <= player_aux)
    return list(range(earliest, n + 1))


def enumerate_deviations(curve: Curve, pool: PoolState,
                         others: Sequence[Order], t: IntrinsicType,
                         model: StrategyModel,
                         grid: DeviationGrid) -> Iterator[Deviation]:
    """Yield the strategy family in a fixed deterministic order."""
    sorted_others, aux_sorted = _arrival_sorted(others)
    n = len(sorted_others)
    player_aux = t.aux if t.aux is not None else float(n)
    positions = _allowed_positions(model, aux_sorted, player_aux)
    last = positions[-1]
    r0 = marginal_rate(curve, pool)

    yield Deviation((), last, label="abstain")

    for rate in grid.rate_points:
        for qty in grid.qty_points:
            if qty <= 0.0:
                continue
            order = Order(t.otype, rate, qty)
            for pos in positions:
                yield Deviation((order,), pos, label="misreport")

    if grid.include_analytic and t.otype is OrderType.BUY_X:
        rival_rates = sorted({
            o.rate.value for o in sorted_others
            if not o.rate.is_infinite and o.rate.value > r0
        })
        for rival in rival_rates:
            volume = x_for_avg_rate(curve, pool, rival)
            if volume > 0.0:
                order = Order(OrderType.BUY_X, INF_RATE, volume)
                for pos in positions:
                    yield Deviation((order,), pos, label="analytic_volume")
        probe_qty = 1e-3 * max(grid.qty_points)
        if probe_qty > 0.0:
            order = Order(OrderType.BUY_X, INF_RATE, probe_qty)
            for pos in positions:
                yield Deviation((order,), pos, label="analytic_probe")

    if grid.max_sybil >= 2:
        combos = [
            Order(t.otype, rate, qty)
            for rate in grid.sybil_rate_points
            for qty in grid.sybil_qty_points
            if qty > 0.0
        ]
        for a in range(len(combos)):
            for b in range(a, len(combos)):
                yield Deviation((combos[a], combos[b]), last, label="sybil_pair")

    if model is StrategyModel.PLAIN and 0 < n <= 6:
        honest = honest_strategy(t)
        singles = [
            (Order(t.otype, rate, qty),)
            for rate in grid.sybil_rate_points
            for qty in grid.sybil_qty_points
            if qty > 0.0
        ]
        variants: list[tuple[tuple[Order, ...], str]] = [
            (honest, "censor_honest"), ((), "censor_abstain"),
        ] + [(orders, "censor_misreport") for orders in singles]
        for mask in range(1, 1 << n):
            censored = frozenset(i for i in range(n) if mask >> i & 1)
            for orders, label in variants:
                yield Deviation(orders, n, censored, label)


def evaluate_deviation(mechanism: Mechanism, curve: Curve, pool: PoolState,
                       others: Sequence[Order], deviation: Deviation,
                       tol: Tolerances = DEFAULT_TOLERANCES) -> Outcome | None:
    """Joint outcome of the player's orders under the deviation.

    Returns None when the deviation makes the mechanism itself fail (such
    a play is not a usable strategy).
    """
    sorted_others, _ = _arrival_sorted(others)
    kept = [o for i, o in enumerate(sorted_others) if i not in deviation.censored]
    pos = min(deviation.position, len(kept))
    batch = kept[:pos] + list(deviation.orders) + kept[pos:]
    try:
        result = mechanism(curve, pool, batch, tol)
    except MechanismError:
        return None
    joint = Outcome(0.0, 0.0)
    for k in range(pos, pos + len(deviation.orders)):
        joint = joint + result.outcomes[k]
    return joint


def ic_audit(mechanism: Mechanism | MechanismId | str, curve: Curve,
             pool: PoolState, others: Sequence[Order], t: IntrinsicType,
             model: StrategyModel, grid: DeviationGrid,
             tol: Tolerances = DEFAULT_TOLERANCES) -> AuditReport:
    """Search the grid's strategy family for a strictly profitable deviation.

    The honest benchmark is truthful revelation at the player's arrival
    slot. A deviation wins if its joint outcome is strictly preferred
    under the intrinsic type's ranking with tol_audit dead-band. The first
    winning deviation (in enumeration order) is reported as the witness;
    a pass means no violation was found at this grid.
    """
    if not callable(mechanism):
        mechanism = get_mechanism(mechanism)
    sorted_others, aux_sorted = _arrival_sorted(others)
    player_aux = t.aux if t.aux is not None else float(len(sorted_others))
    honest_pos = sum(1 for a in aux_sorted if a <= player_aux)
    honest = Deviation(honest_strategy(t), honest_pos, label="honest")
    honest_outcome = evaluate_deviation(mechanism, curve, pool, others, honest, tol)
    if honest_outcome is None:
        raise ValueError("mechanism failed on the honest batch")

    for deviation in enumerate_deviations(curve, pool, others, t, model, grid):
        outcome = evaluate_deviation(mechanism, curve, pool, others, deviation, tol)
        if outcome is None:
            continue
        verdict = compare(t, honest_outcome, outcome, eps=tol.tol_audit)
        if verdict is PrefResult.STRICTLY_BETTER:
            return AuditReport(
                "incentive_compatibility", False,
                {
                    "deviation": deviation.describe(),
                    "honest_outcome": [honest_outcome.dx, honest_outcome.dy],
                    "deviation_outcome": [outcome.dx, outcome.dy],
                    "model": model.value,
                },
            )
    return AuditReport("incentive_compatibility", True)
