"""Core data model shared by every metric module.

All types are immutable after construction and safe to share across
concurrent readers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping

from .errors import (
    DuplicateIdError,
    MissingConditionError,
    TooFewConditionsError,
    UnknownConditionError,
    UnknownValueError,
    ValidationError,
)

IDENTITY_TRANSFORM = "identity"


@dataclass(frozen=True, slots=True)
class Condition:
    """One operating condition: a named, closed list of at least two values."""

    name: str
    values: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if not self.name:
            raise ValidationError("condition name must be nonempty")
        if len(self.values) < 2:
            raise ValidationError(
                f"condition '{self.name}' needs at least 2 values, got {len(self.values)}"
            )
        if len(set(self.values)) != len(self.values):
            raise ValidationError(f"condition '{self.name}' lists duplicate values")

    @property
    def size(self) -> int:
        return len(self.values)


@dataclass(frozen=True, slots=True)
class ScenarioSpace:
    """Ordered list of operating conditions defining the scenario universe."""

    conditions: tuple[Condition, ...]

    def __post_init__(self):
        object.__setattr__(self, "conditions", tuple(self.conditions))
        if len(self.conditions) < 2:
            raise TooFewConditionsError(
                f"scenario space needs at least 2 conditions, got {len(self.conditions)}"
            )
        names = [c.name for c in self.conditions]
        if len(set(names)) != len(names):
            raise ValidationError("condition names must be unique")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.conditions)

    def condition(self, name: str) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise UnknownConditionError(f"unknown condition '{name}'")

    def pairs(self) -> list[tuple[int, int]]:
        """All index pairs (i, j), i < j, in lexicographic order."""
        n = len(self.conditions)
        return [(i, j) for i in range(n) for j in range(i + 1, n)]

    def scenarios(self) -> Iterator["Scenario"]:
        """Full cross product, lexicographic by (condition index, value index)."""

        def walk(prefix: list[tuple[str, str]], rest: tuple[Condition, ...]):
            if not rest:
                yield Scenario.of(dict(prefix))
                return
            head = rest[0]
            for v in head.values:
                yield from walk(prefix + [(head.name, v)], rest[1:])

        yield from walk([], self.conditions)


@dataclass(frozen=True, slots=True)
class Scenario:
    """One valuation of every condition; stored sorted by condition name."""

    assignment: tuple[tuple[str, str], ...]

    def __post_init__(self):
        pairs = tuple(sorted((str(n), str(v)) for n, v in self.assignment))
        object.__setattr__(self, "assignment", pairs)
        names = [n for n, _ in pairs]
        if len(set(names)) != len(names):
            raise ValidationError("scenario assigns a condition twice")

    @classmethod
    def of(cls, mapping: Mapping[str, str]) -> "Scenario":
        return cls(tuple(mapping.items()))

    def as_dict(self) -> dict[str, str]:
        return dict(self.assignment)

    def value(self, condition_name: str) -> str:
        try:
            return self.as_dict()[condition_name]
        except KeyError:
            raise MissingConditionError(
                f"scenario does not assign condition '{condition_name}'"
            ) from None

    def values_in(self, space: ScenarioSpace) -> tuple[str, ...]:
        """Values ordered by the space's condition order."""
        return tuple(self.value(c.name) for c in space.conditions)

    def validate_against(self, space: ScenarioSpace) -> None:
        got = self.as_dict()
        for cond in space.conditions:
            if cond.name not in got:
                raise MissingConditionError(
                    f"scenario does not assign condition '{cond.name}'"
                )
            if got[cond.name] not in cond.values:
                raise UnknownValueError(
                    f"value '{got[cond.name]}' is not declared for condition '{cond.name}'"
                )
        extra = set(got) - set(space.names)
        if extra:
            raise UnknownConditionError(
                f"unknown condition '{sorted(extra)[0]}' in scenario"
            )

    def label(self) -> str:
        return "/".join(f"{n}={v}" for n, v in self.assignment)


@dataclass(frozen=True, slots=True)
class BBox:
    """Axis-aligned box in continuous pixel coordinates."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        for name in ("x_min", "y_min", "x_max", "y_max"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValidationError("box coordinates must be finite")
            object.__setattr__(self, name, value)
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValidationError(
                f"box must have positive extent, got "
                f"({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )

    @classmethod
    def from_list(cls, xs) -> "BBox":
        if not isinstance(xs, (list, tuple)) or len(xs) != 4:
            raise ValidationError(f"box must be [x_min, y_min, x_max, y_max], got {xs!r}")
        try:
            coords = [float(v) for v in xs]
        except (TypeError, ValueError):
            raise ValidationError(f"box coordinates must be numbers, got {xs!r}") from None
        return cls(*coords)

    def to_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)


def jaccard(a: BBox, b: BBox) -> float:
    """Intersection area over union area of two boxes; 0.0 when disjoint."""
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True, slots=True)
class ObjectLabel:
    """One ground-truth object: class, box and optional segmentation mask."""

    class_label: str
    box: BBox
    mask_path: str | None = None

    def __post_init__(self):
        if not self.class_label:
            raise ValidationError("object class_label must be nonempty")


@dataclass(frozen=True, slots=True)
class GroundTruth:
    """Classification label or a list of detected objects, never both.

    A classification label may carry an optional whole-image segmentation
    mask so occlusion analysis works outside detection mode.
    """

    class_label: str | None = None
    objects: tuple[ObjectLabel, ...] | None = None
    mask_path: str | None = None

    def __post_init__(self):
        if self.objects is not None:
            object.__setattr__(self, "objects", tuple(self.objects))
        if (self.class_label is None) == (self.objects is None):
            raise ValidationError(
                "ground truth needs exactly one of class_label or objects"
            )
        if self.class_label is not None and not self.class_label:
            raise ValidationError("ground-truth class_label must be nonempty")
        if self.mask_path is not None and self.class_label is None:
            raise ValidationError(
                "a top-level mask_path belongs to classification ground truth; "
                "detection masks live on each object"
            )


@dataclass(frozen=True, slots=True)
class DataPoint:
    id: str
    image_path: str | None = None
    scenario: Scenario | None = None
    ground_truth: GroundTruth | None = None

    def __post_init__(self):
        if not self.id:
            raise ValidationError("data point id must be nonempty")


@dataclass(frozen=True, slots=True)
class DatasetManifest:
    """Validated list of data points; ids are unique."""

    points: tuple[DataPoint, ...]
    base_dir: str | None = field(default=None, compare=False)
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        index: dict[str, DataPoint] = {}
        for p in self.points:
            if p.id in index:
                raise DuplicateIdError(f"duplicate data point id '{p.id}'")
            index[p.id] = p
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[DataPoint]:
        return iter(self.points)

    def get(self, point_id: str) -> DataPoint | None:
        return self._index.get(point_id)

    def labeled(self) -> list[DataPoint]:
        """Points carrying a scenario valuation."""
        return [p for p in self.points if p.scenario is not None]

    def image_file(self, point: DataPoint) -> Path:
        """Resolve a point's image path against the manifest location."""
        if point.image_path is None:
            raise ValidationError(f"data point '{point.id}' has no image_path")
        path = Path(point.image_path)
        if not path.is_absolute() and self.base_dir is not None:
            path = Path(self.base_dir) / path
        return path


@dataclass(frozen=True, slots=True)
class ActivationRecord:
    """Raw activation vector of one input at one layer."""

    input_id: str
    layer: str
    activations: tuple[float, ...]

    def __post_init__(self):
        if not self.input_id:
            raise ValidationError("activation record input_id must be nonempty")
        if not self.layer:
            raise ValidationError("activation record layer must be nonempty")
        try:
            vals = tuple(float(v) for v in self.activations)
        except (TypeError, ValueError):
            raise ValidationError("activations must be a list of numbers") from None
        if not vals:
            raise ValidationError("activation vector must be nonempty")
        if any(not math.isfinite(v) for v in vals):
            raise ValidationError("activations must be finite")
        object.__setattr__(self, "activations", vals)


def _check_probs(probs: Mapping[str, float], what: str) -> dict[str, float]:
    out: dict[str, float] = {}
    for label, p in probs.items():
        try:
            p = float(p)
        except (TypeError, ValueError):
            raise ValidationError(f"{what} probability for '{label}' is not a number") from None
        if not (0.0 <= p <= 1.0):
            raise ValidationError(f"{what} probability {p} for '{label}' outside [0, 1]")
        out[str(label)] = p
    return out


@dataclass(frozen=True, slots=True)
class Detection:
    """One detected box with per-class probabilities."""

    box: BBox
    class_probs: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, "class_probs", _check_probs(self.class_probs, "detection"))


@dataclass(frozen=True, slots=True)
class PredictionRecord:
    """Oracle output for one input under one transform at one epsilon."""

    input_id: str
    transform: str = IDENTITY_TRANSFORM
    epsilon: float = 0.0
    outputs: Mapping[str, float] | None = None
    detections: tuple[Detection, ...] | None = None

    def __post_init__(self):
        if not self.input_id:
            raise ValidationError("prediction record input_id must be nonempty")
        if not self.transform:
            raise ValidationError("prediction record transform must be nonempty")
        eps = float(self.epsilon)
        object.__setattr__(self, "epsilon", eps)
        if eps < 0.0 or not math.isfinite(eps):
            raise ValidationError(f"epsilon must be >= 0, got {eps}")
        if self.transform == IDENTITY_TRANSFORM and eps != 0.0:
            raise ValidationError("identity records must have epsilon 0")
        if (self.outputs is None) == (self.detections is None):
            raise ValidationError(
                "prediction record needs exactly one of outputs or detections"
            )
        if self.outputs is not None:
            object.__setattr__(self, "outputs", _check_probs(self.outputs, "output"))
        if self.detections is not None:
            object.__setattr__(self, "detections", tuple(self.detections))

    @property
    def is_identity(self) -> bool:
        return self.transform == IDENTITY_TRANSFORM
