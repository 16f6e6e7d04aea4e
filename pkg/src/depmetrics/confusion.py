"""Weighted confusion scoring and scenario-based performance degradation.

Misclassifications carry severity weights: a square nonnegative matrix
over the class list (which always includes the reserved "background"
label) with a zero diagonal. The weighted score is the penalty mass per
sample; plain accuracy rides along. Degradation breaks a base metric
down per scenario and discounts the global figure by the scenario
coverage metric.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable

from .errors import (
    DuplicateIdError,
    NoScenariosError,
    UnknownClassError,
    ValidationError,
)
from .model import DatasetManifest, PredictionRecord, Scenario, ScenarioSpace
from .scenario import CoverageReport, scene_coverage

BACKGROUND = "background"


@dataclass(frozen=True, slots=True)
class WeightMatrix:
    """Severity weights: weights[true][predicted], diagonal fixed at 0."""

    classes: tuple[str, ...]
    weights: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(
            self, "weights", tuple(tuple(float(w) for w in row) for row in self.weights)
        )
        if len(set(self.classes)) != len(self.classes):
            raise ValidationError("weight matrix classes must be unique")
        if BACKGROUND not in self.classes:
            raise ValidationError(f"weight matrix must include the '{BACKGROUND}' class")
        n = len(self.classes)
        if len(self.weights) != n or any(len(row) != n for row in self.weights):
            raise ValidationError(f"weight matrix must be {n}x{n}")
        for i, row in enumerate(self.weights):
            if row[i] != 0.0:
                raise ValidationError(
                    f"diagonal weight for '{self.classes[i]}' must be 0, got {row[i]}"
                )
            for j, w in enumerate(row):
                if w < 0.0:
                    raise ValidationError(
                        f"weight for {self.classes[i]}->{self.classes[j]} "
                        f"must be >= 0, got {w}"
                    )

    def index(self, label: str) -> int:
        try:
            return self.classes.index(label)
        except ValueError:
            raise UnknownClassError(
                f"class '{label}' is not in the weight matrix {list(self.classes)}"
            ) from None

    def weight(self, true_label: str, predicted_label: str) -> float:
        return self.weights[self.index(true_label)][self.index(predicted_label)]


# Traffic-scene default: penalties rise with safety impact, worst for a
# pedestrian reported as empty background; all false positives weigh 1.
DEFAULT_WEIGHTS = WeightMatrix(
    classes=("pedestrian", "vehicle", "background"),
    weights=(
        (0.0, 2.0, 4.0),
        (1.0, 0.0, 3.0),
        (1.0, 1.0, 0.0),
    ),
)


def load_weight_matrix(path) -> WeightMatrix:
    """Parse {"classes": [...], "weights": [[...], ...]}."""
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValidationError("file not found", path=path) from None
    except json.JSONDecodeError as e:
        raise ValidationError(f"invalid JSON ({e.msg})", path=path) from None
    if not isinstance(obj, dict) or "classes" not in obj or "weights" not in obj:
        raise ValidationError("weights file must carry classes and weights", path=path)
    try:
        return WeightMatrix(tuple(obj["classes"]), tuple(map(tuple, obj["weights"])))
    except (TypeError, ValidationError) as e:
        message = e.message if isinstance(e, ValidationError) else str(e)
        raise ValidationError(message, path=path) from None


def predicted_class(record: PredictionRecord, threshold: float = 0.5) -> str:
    """Argmax label of a classification record; background under threshold.

    Ties break toward the lexicographically smallest label.
    """
    if record.outputs is None:
        raise ValidationError(
            f"record for '{record.input_id}' has detections; confusion scoring "
            "needs classification outputs"
        )
    if not record.outputs:
        return BACKGROUND
    best = min((-p, label) for label, p in record.outputs.items())
    if -best[0] < threshold:
        return BACKGROUND
    return best[1]


@dataclass(frozen=True, slots=True)
class CellMass:
    true_label: str
    predicted_label: str
    count: int
    weight: float

    @property
    def mass(self) -> float:
        return self.count * self.weight


@dataclass(frozen=True, slots=True)
class ConfusionReport:
    classes: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]
    weighted_score: float
    correct: int
    worst_cells: tuple[CellMass, ...]
    evaluated: int
    skipped: int

    @property
    def plain_accuracy(self) -> Fraction:
        return Fraction(self.correct, self.evaluated)

    @property
    def accuracy_rational(self) -> str:
        return f"{self.correct}/{self.evaluated}"


def _identity_by_input(records: Iterable[PredictionRecord]) -> dict[str, PredictionRecord]:
    out: dict[str, PredictionRecord] = {}
    for record in records:
        if not record.is_identity:
            continue
        if record.input_id in out:
            raise DuplicateIdError(
                f"duplicate identity record for input '{record.input_id}'"
            )
        out[record.input_id] = record
    return out


def weighted_confusion(
    manifest: DatasetManifest,
    predictions: Iterable[PredictionRecord],
    weights: WeightMatrix = DEFAULT_WEIGHTS,
    threshold: float = 0.5,
) -> ConfusionReport:
    """Penalty mass per sample over the identity predictions.

    Evaluates every point holding both a ground-truth class and an
    identity prediction; other points are counted as skipped. The score
    is sum of weights[true][pred] over misclassifications divided by the
    evaluated count; plain accuracy is the exact diagonal fraction.
    """
    identity = _identity_by_input(predictions)
    n = len(weights.classes)
    counts = [[0] * n for _ in range(n)]
    evaluated = 0
    skipped = 0
    for point in manifest:
        label = point.ground_truth.class_label if point.ground_truth else None
        record = identity.get(point.id)
        if label is None or record is None:
            skipped += 1
            continue
        true_i = weights.index(label)
        pred_i = weights.index(predicted_class(record, threshold))
        counts[true_i][pred_i] += 1
        evaluated += 1
    if evaluated == 0:
        raise ValidationError(
            "no point carries both a ground-truth class and an identity prediction"
        )

    score = sum(
        weights.weights[i][j] * counts[i][j]
        for i in range(n)
        for j in range(n)
        if i != j
    ) / evaluated
    correct = sum(counts[i][i] for i in range(n))
    cells = [
        CellMass(weights.classes[i], weights.classes[j], counts[i][j], weights.weights[i][j])
        for i in range(n)
        for j in range(n)
        if i != j and counts[i][j] > 0
    ]
    cells.sort(key=lambda cell: (-cell.mass, cell.true_label, cell.predicted_label))
    return ConfusionReport(
        classes=weights.classes,
        counts=tuple(tuple(row) for row in counts),
        weighted_score=score,
        correct=correct,
        worst_cells=tuple(cells),
        evaluated=evaluated,
        skipped=skipped,
    )


@dataclass(frozen=True, slots=True)
class ScenarioSlice:
    scenario: Scenario
    count: int
    value: float


@dataclass(frozen=True, slots=True)
class DegradationReport:
    base: str
    per_scenario: tuple[ScenarioSlice, ...]
    overall: float
    coverage_numerator: int
    coverage_denominator: int
    discounted: float
    evaluated: int
    skipped: int

    @property
    def coverage_used(self) -> Fraction:
        return Fraction(self.coverage_numerator, self.coverage_denominator)

    @property
    def coverage_rational(self) -> str:
        return f"{self.coverage_numerator}/{self.coverage_denominator}"


def degradation(
    manifest: DatasetManifest,
    predictions: Iterable[PredictionRecord],
    space: ScenarioSpace,
    base: str = "accuracy",
    weights: WeightMatrix = DEFAULT_WEIGHTS,
    threshold: float = 0.5,
    coverage: CoverageReport | None = None,
) -> DegradationReport:
    """Per-scenario breakdown of a base metric plus a coverage-discounted figure.

    ``base`` is "accuracy" (higher is better) or "weighted" (penalty mass,
    lower is better). The global value runs over all scenario-labeled
    evaluated points and is multiplied by the scenario coverage metric to
    discount for unexercised operating conditions.
    """
    if base not in ("accuracy", "weighted"):
        raise ValidationError(f"base must be accuracy or weighted, got '{base}'")
    identity = _identity_by_input(predictions)
    coverage = coverage if coverage is not None else scene_coverage(manifest, space)

    groups: dict[Scenario, list[tuple[str, str]]] = {}
    skipped = 0
    for point in manifest:
        label = point.ground_truth.class_label if point.ground_truth else None
        record = identity.get(point.id)
        if label is None or record is None or point.scenario is None:
            skipped += 1
            continue
        point.scenario.validate_against(space)
        groups.setdefault(point.scenario, []).append(
            (label, predicted_class(record, threshold))
        )
    if not groups:
        raise NoScenariosError(
            "no scenario-labeled point carries a ground-truth class and an "
            "identity prediction"
        )

    def evaluate(pairs: list[tuple[str, str]]) -> float:
        if base == "accuracy":
            return sum(1 for t, p in pairs if t == p) / len(pairs)
        return sum(weights.weight(t, p) for t, p in pairs) / len(pairs)

    slices = [
        ScenarioSlice(scenario, len(pairs), evaluate(pairs))
        for scenario, pairs in groups.items()
    ]
    slices.sort(key=lambda s: s.scenario.values_in(space))
    all_pairs = [pair for pairs in groups.values() for pair in pairs]
    overall = evaluate(all_pairs)
    return DegradationReport(
        base=base,
        per_scenario=tuple(slices),
        overall=overall,
        coverage_numerator=coverage.numerator,
        coverage_denominator=coverage.denominator,
        discounted=overall * float(coverage.metric),
        evaluated=len(all_pairs),
        skipped=skipped,
    )
