"""Validation findings shared by the ontology, scenario and constraint checkers."""
from __future__ import annotations

from dataclasses import asdict, dataclass

ERROR = "error"
WARNING = "warning"


@dataclass(frozen=True, order=True)
class Issue:
    entity: str
    message: str
    severity: str = ERROR

    def to_dict(self):
        return asdict(self)

    def __str__(self):
        return f"{self.severity}: {self.entity}: {self.message}"


def sort_report(issues):
    return sorted(set(issues), key=lambda i: (i.entity, i.severity, i.message))


def errors(report):
    return [i for i in report if i.severity == ERROR]


def has_errors(report) -> bool:
    return any(i.severity == ERROR for i in report)
