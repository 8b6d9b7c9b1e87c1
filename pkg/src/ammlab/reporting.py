"""Audit report record shared by the well-formedness check, the property
auditors, and the counterexample constructions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any


@dataclass(frozen=True)
class AuditReport:
    """Outcome of one property check.

    A failed report always carries a witness: the violating order index,
    arbitrage subset, or profitable deviation, depending on the property.
    """

    property: str
    passed: bool
    witness: dict[str, Any] | None = None

    def __post_init__(self) -> None:
        if not self.passed and self.witness is None:
            raise ValueError("failed report requires a witness")

    def to_json_dict(self) -> dict[str, Any]:
        return {"property": self.property, "passed": self.passed, "witness": self.witness}
