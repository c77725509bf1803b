"""Delta Maintainability Model scores for a commit.

Each changed method version is classified low- or high-risk per property.
A changed line is *good* when it is added to a low-risk unit or deleted from
a high-risk unit, and *bad* otherwise; the score is good / (good + bad).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Protocol


class DmmProperty(str, Enum):
    SIZE = "size"
    COMPLEXITY = "complexity"
    INTERFACING = "interfacing"


# low-risk upper bounds (inclusive)
UNIT_SIZE_LOW_RISK = 15
UNIT_COMPLEXITY_LOW_RISK = 5
UNIT_INTERFACING_LOW_RISK = 2


class ChangedUnit(Protocol):
    nloc: int
    complexity: int
    parameters: list[str]
    before_change: bool
    changed_lines: tuple[int, ...]


@dataclass(frozen=True)
class DmmScores:
    unit_size: float | None
    unit_complexity: float | None
    unit_interfacing: float | None

    @property
    def overall(self) -> float | None:
        present = [v for v in (self.unit_size, self.unit_complexity, self.unit_interfacing) if v is not None]
        return sum(present) / len(present) if present else None


def is_low_risk(unit: ChangedUnit, prop: DmmProperty | str) -> bool:
    prop = DmmProperty(prop)
    if prop is DmmProperty.SIZE:
        return unit.nloc <= UNIT_SIZE_LOW_RISK
    if prop is DmmProperty.COMPLEXITY:
        return unit.complexity <= UNIT_COMPLEXITY_LOW_RISK
    return len(unit.parameters) <= UNIT_INTERFACING_LOW_RISK


def good_bad_lines(units: Iterable[ChangedUnit], prop: DmmProperty | str) -> tuple[int, int]:
    good = bad = 0
    for unit in units:
        n = len(unit.changed_lines)
        low = is_low_risk(unit, prop)
        # after-image rows carry added lines, before-image rows deleted lines
        if low != unit.before_change:
            good += n
        else:
            bad += n
    return good, bad


def dmm(units: Iterable[ChangedUnit], prop: DmmProperty | str) -> float | None:
    """Proportion of low-risk changed lines, or None when no line was classified."""
    good, bad = good_bad_lines(units, prop)
    if good + bad == 0:
        return None
    return good / (good + bad)


def dmm_scores(units: Iterable[ChangedUnit]) -> DmmScores:
    units = list(units)
    return DmmScores(
        dmm(units, DmmProperty.SIZE),
        dmm(units, DmmProperty.COMPLEXITY),
        dmm(units, DmmProperty.INTERFACING),
    )
