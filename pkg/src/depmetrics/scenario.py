"""Scenario coverage over pairs of operating conditions.

The dataset occupies cells in one occupancy table per condition pair
(i, j): a cell is a (value of C_i, value of C_j) combination. The metric
is the occupied-cell count over the total cell count, kept as exact
integers so reports can show the unreduced fraction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .model import DatasetManifest, Scenario, ScenarioSpace


@dataclass(frozen=True, slots=True)
class ProjectionTable:
    """Occupancy of one condition pair."""

    pair: tuple[int, int]
    conditions: tuple[str, str]
    occupied: frozenset[tuple[str, str]]
    capacity: int


@dataclass(frozen=True, slots=True)
class UnoccupiedCell:
    pair: tuple[int, int]
    conditions: tuple[str, str]
    values: tuple[str, str]


@dataclass(frozen=True, slots=True)
class CoverageReport:
    numerator: int
    denominator: int
    tables: tuple[ProjectionTable, ...]
    unoccupied: tuple[UnoccupiedCell, ...]
    skipped: int

    @property
    def metric(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    @property
    def value(self) -> float:
        return self.numerator / self.denominator

    @property
    def rational(self) -> str:
        return f"{self.numerator}/{self.denominator}"


def scene_coverage(manifest: DatasetManifest, space: ScenarioSpace) -> CoverageReport:
    """Fraction of pair-table cells occupied by the manifest's scenarios.

    Unlabeled points are skipped and counted. The denominator covers all
    cells, including combinations that may be physically impossible.
    """
    pairs = space.pairs()
    occupied: dict[tuple[int, int], set[tuple[str, str]]] = {p: set() for p in pairs}
    skipped = 0
    for point in manifest:
        if point.scenario is None:
            skipped += 1
            continue
        point.scenario.validate_against(space)
        values = point.scenario.values_in(space)
        for i, j in pairs:
            occupied[(i, j)].add((values[i], values[j]))

    tables = []
    unoccupied = []
    numerator = 0
    denominator = 0
    for i, j in pairs:
        ci, cj = space.conditions[i], space.conditions[j]
        capacity = ci.size * cj.size
        cells = occupied[(i, j)]
        numerator += len(cells)
        denominator += capacity
        tables.append(
            ProjectionTable((i, j), (ci.name, cj.name), frozenset(cells), capacity)
        )
        for vi in ci.values:
            for vj in cj.values:
                if (vi, vj) not in cells:
                    unoccupied.append(UnoccupiedCell((i, j), (ci.name, cj.name), (vi, vj)))
    return CoverageReport(
        numerator=numerator,
        denominator=denominator,
        tables=tuple(tables),
        unoccupied=tuple(unoccupied),
        skipped=skipped,
    )


@dataclass(frozen=True, slots=True)
class Suggestion:
    """A proposed new scenario and the number of cells it would newly occupy."""

    scenario: Scenario
    gain: int


def suggest_scenarios(
    report: CoverageReport, space: ScenarioSpace, budget: int
) -> list[Suggestion]:
    """Greedy improvement: up to ``budget`` scenarios maximizing new cells.

    Candidates are scanned over the full value cross product. Ties on
    cell gain prefer candidates exercising more not-yet-witnessed
    condition values, then the lexicographically first candidate by
    (condition index, value index), so the result is reproducible.
    Stops early once no scenario gains anything.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    occupied = {t.pair: set(t.occupied) for t in report.tables}
    pairs = space.pairs()
    index_ranges = [range(c.size) for c in space.conditions]
    seen_values: dict[int, set[str]] = {i: set() for i in range(len(space.conditions))}
    for (i, j), cells in occupied.items():
        for vi, vj in cells:
            seen_values[i].add(vi)
            seen_values[j].add(vj)

    suggestions: list[Suggestion] = []
    for _ in range(budget):
        best_key = (0, 0)
        best: tuple[int, ...] | None = None
        for candidate in itertools.product(*index_ranges):
            values = tuple(
                space.conditions[k].values[candidate[k]] for k in range(len(candidate))
            )
            gain = sum(
                1 for i, j in pairs if (values[i], values[j]) not in occupied[(i, j)]
            )
            novelty = sum(1 for k, v in enumerate(values) if v not in seen_values[k])
            if gain > 0 and (gain, novelty) > best_key:
                best_key = (gain, novelty)
                best = candidate
        if best is None:
            break
        values = tuple(space.conditions[k].values[best[k]] for k in range(len(best)))
        for i, j in pairs:
            occupied[(i, j)].add((values[i], values[j]))
        for k, v in enumerate(values):
            seen_values[k].add(v)
        scenario = Scenario.of(
            {c.name: values[k] for k, c in enumerate(space.conditions)}
        )
        suggestions.append(Suggestion(scenario, best_key[0]))
    return suggestions
