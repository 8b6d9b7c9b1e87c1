"""Order, batch, and outcome records plus the four-part well-formedness audit.

An order is (type, rate, qty, aux): rate is the worst acceptable exchange
rate in Y per X (for the Y-denominated types the bound applies through
1/rate); qty is denominated in the order's own asset (X for buy_x/sell_x,
Y for buy_y/sell_y); aux is an opaque arrival tag that only the strategic
auditor interprets.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Any, Iterable

from .amm_core import Curve, PoolState
from .numerics import DEFAULT_TOLERANCES, ExtRate, Tolerances
from .reporting import AuditReport


class OrderType(enum.Enum):
    BUY_X = "buy_x"
    BUY_Y = "buy_y"
    SELL_X = "sell_x"
    SELL_Y = "sell_y"

    @property
    def is_buy(self) -> bool:
        return self in (OrderType.BUY_X, OrderType.BUY_Y)

    @property
    def demands_x(self) -> bool:
        """buy_x / sell_y orders take X out of the market."""
        return self in (OrderType.BUY_X, OrderType.SELL_Y)

    @property
    def supplies_x(self) -> bool:
        """sell_x / buy_y orders push X into the market."""
        return self in (OrderType.SELL_X, OrderType.BUY_Y)


@dataclass(frozen=True)
class Order:
    otype: OrderType
    rate: ExtRate
    qty: float
    aux: float | None = None


# An intrinsic type has the same shape as an order; the distinction is
# semantic (true valuation/demand versus a posted bid). The strategic
# auditor additionally allows qty = 0 to model a pure arbitrageur.
IntrinsicType = Order


def buy_x(rate: Any, qty: float, aux: float | None = None) -> Order:
    return Order(OrderType.BUY_X, ExtRate.coerce(rate), float(qty), aux)


def buy_y(rate: Any, qty: float, aux: float | None = None) -> Order:
    return Order(OrderType.BUY_Y, ExtRate.coerce(rate), float(qty), aux)


def sell_x(rate: Any, qty: float, aux: float | None = None) -> Order:
    return Order(OrderType.SELL_X, ExtRate.coerce(rate), float(qty), aux)


def sell_y(rate: Any, qty: float, aux: float | None = None) -> Order:
    return Order(OrderType.SELL_Y, ExtRate.coerce(rate), float(qty), aux)


@dataclass(frozen=True)
class Outcome:
    """Per-order net gain (dx, dy); negative values are losses."""

    dx: float
    dy: float

    def __add__(self, other: "Outcome") -> "Outcome":
        return Outcome(self.dx + other.dx, self.dy + other.dy)


ZERO_OUTCOME = Outcome(0.0, 0.0)


@dataclass(frozen=True)
class BatchResult:
    """Outcomes aligned with the input batch plus the ending pool state."""

    outcomes: tuple[Outcome, ...]
    end_pool: PoolState
    uniform_price: float | None = None

    @classmethod
    def build(cls, outcomes: Iterable[Outcome], end_pool: PoolState,
              uniform_price: float | None = None) -> "BatchResult":
        return cls(tuple(outcomes), end_pool, uniform_price)


# --- JSON encoding ---------------------------------------------------------
#
# Exact key set: {"type", "rate", "qty"} plus optional "aux".
# "rate" is a number or the string "inf".

_ORDER_KEYS = {"type", "rate", "qty", "aux"}


def order_to_json(order: Order) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "type": order.otype.value,
        "rate": order.rate.to_json(),
        "qty": order.qty,
    }
    if order.aux is not None:
        doc["aux"] = order.aux
    return doc


def order_from_json(doc: dict[str, Any]) -> Order:
    if not isinstance(doc, dict):
        raise ValueError(f"order must be an object, got {type(doc).__name__}")
    unknown = set(doc) - _ORDER_KEYS
    if unknown:
        raise ValueError(f"unknown order keys: {sorted(unknown)}")
    for key in ("type", "rate", "qty"):
        if key not in doc:
            raise ValueError(f"order missing required key {key!r}")
    try:
        otype = OrderType(doc["type"])
    except ValueError:
        raise ValueError(f"unknown order type {doc['type']!r}") from None
    rate = ExtRate.coerce(doc["rate"])
    qty = float(doc["qty"])
    if not (math.isfinite(qty) and qty > 0.0):
        raise ValueError(f"qty must be a positive finite number, got {doc['qty']!r}")
    aux = doc.get("aux")
    if aux is not None:
        aux = float(aux)
        if aux < 0.0 or not math.isfinite(aux):
            raise ValueError(f"aux must be a nonnegative finite number, got {doc['aux']!r}")
    return Order(otype, rate, qty, aux)


# --- Well-formedness -------------------------------------------------------


def _fulfillment_violation(order: Order, out: Outcome, slack: float) -> str | None:
    """Reasonable fulfillment: fill within [0, qty] in the order's own asset."""
    filled = {
        OrderType.BUY_X: out.dx,
        OrderType.BUY_Y: out.dy,
        OrderType.SELL_X: -out.dx,
        OrderType.SELL_Y: -out.dy,
    }[order.otype]
    if filled < -slack:
        return "fulfilled against the order's direction"
    if filled > order.qty + slack:
        return f"fulfilled {filled} beyond quantity {order.qty}"
    return None


def _free_lunch_violation(out: Outcome, slack: float) -> str | None:
    """No free lunch: dx*dy < 0 or dx = dy = 0 (within slack)."""
    if out.dx >= slack and out.dy >= slack:
        return f"gains in both assets: ({out.dx}, {out.dy})"
    if out.dx <= -slack and out.dy <= -slack:
        return f"losses in both assets: ({out.dx}, {out.dy})"
    return None


def _rationality_violation(order: Order, out: Outcome, slack: float) -> str | None:
    """Individual rationality, vacuous for dx = 0 outcomes."""
    if out.dx == 0.0:
        return None
    realized = -out.dy / out.dx
    if order.otype.demands_x:
        if order.rate.is_infinite:
            return None
        if realized > order.rate.value + slack:
            return f"executed rate {realized} above limit {order.rate.value}"
    else:
        if order.rate.is_infinite or realized < float(order.rate.value) - slack:
            limit = "inf" if order.rate.is_infinite else order.rate.value
            return f"executed rate {realized} below limit {limit}"
    return None


def check_well_formed(curve: Curve, pool: PoolState, batch: list[Order],
                      result: BatchResult,
                      tol: Tolerances = DEFAULT_TOLERANCES) -> AuditReport:
    """Audit the four well-formedness clauses of a batch execution.

    Per order: reasonable fulfillment, no free lunch, individual
    rationality (checked on the realized rate -dy/dx whenever dx != 0).
    On the aggregate: the end pool must sit on the curve's potential level
    set within tol_audit relative drift, and must match the reserves
    implied by the summed flows.
    """
    if len(batch) != len(result.outcomes):
        raise ValueError(
            f"batch has {len(batch)} orders but result has {len(result.outcomes)} outcomes"
        )
    slack = tol.tol_audit
    for i, (order, out) in enumerate(zip(batch, result.outcomes)):
        for clause, msg in (
            ("reasonable_fulfillment", _fulfillment_violation(order, out, slack)),
            ("no_free_lunch", _free_lunch_violation(out, slack)),
            ("individual_rationality", _rationality_violation(order, out, slack)),
        ):
            if msg is not None:
                return AuditReport(
                    "well_formed", False,
                    {"order": i, "clause": clause, "detail": msg},
                )

    x_tot = sum(out.dx for out in result.outcomes)
    y_tot = sum(out.dy for out in result.outcomes)
    implied_x, implied_y = pool.x - x_tot, pool.y - y_tot
    scale = max(pool.x, pool.y)
    if (abs(implied_x - result.end_pool.x) > slack * scale
            or abs(implied_y - result.end_pool.y) > slack * scale):
        return AuditReport(
            "well_formed", False,
            {"order": None, "clause": "conformance",
             "detail": f"end pool {result.end_pool} does not match flows "
                       f"implying ({implied_x}, {implied_y})"},
        )
    if implied_x <= 0.0 or implied_y <= 0.0:
        return AuditReport(
            "well_formed", False,
            {"order": None, "clause": "conformance",
             "detail": f"flows deplete reserves: ({implied_x}, {implied_y})"},
        )
    drift = abs(curve.potential(implied_x, implied_y) - curve.c) / curve.c
    if drift > slack:
        return AuditReport(
            "well_formed", False,
            {"order": None, "clause": "conformance",
             "detail": f"potential drift {drift:.3e} beyond tolerance"},
        )
    return AuditReport("well_formed", True)
