"""Pass/fail records produced by the verification routines."""

from dataclasses import dataclass, field
from typing import Any, Dict, Iterable


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one numerical check.

    ``max_violation`` is the largest residual seen (0 when nothing could be
    violated); ``checked`` counts the individual comparisons made.
    """

    name: str
    passed: bool
    max_violation: float
    checked: int = 0
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "max_violation": self.max_violation,
            "checked": self.checked,
            "details": dict(self.details),
        }


def combine_reports(name: str, reports: Iterable[CheckReport]) -> CheckReport:
    """Fold several reports into one that passes only if all of them pass."""
    reports = list(reports)
    return CheckReport(
        name=name,
        passed=all(r.passed for r in reports),
        max_violation=max((r.max_violation for r in reports), default=0.0),
        checked=sum(r.checked for r in reports),
        details={"checks": [r.to_dict() for r in reports]},
    )
