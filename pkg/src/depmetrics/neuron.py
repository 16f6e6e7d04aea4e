"""Neuron coverage from activation dumps.

Two metrics over one layer's boolean firing indicators:

* k-activation coverage: which (neuron k-tuple, on/off k-pattern)
  combinations the inputs witnessed, out of C(c, k) * 2^k cells.
* activation-pattern deviation: bucket inputs by activated-neuron count
  into gamma equal ranges and measure the mass far from the majority
  bucket (more than one bucket away).
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyInputError,
    KTooLargeError,
    MixedScenarioError,
    ValidationError,
)
from .model import ActivationRecord, DatasetManifest, Scenario, ScenarioSpace

DEFAULT_MAX_K = 3


@dataclass(frozen=True, slots=True, eq=False)
class ActivationMatrix:
    """Boolean firing indicators, one row per input, for one layer."""

    layer: str
    input_ids: tuple[str, ...]
    bits: np.ndarray
    threshold: float = 0.0

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.ndim != 2:
            raise ValidationError(f"bits must be 2-D, got shape {bits.shape}")
        if bits.shape[0] != len(self.input_ids):
            raise ValidationError(
                f"{len(self.input_ids)} input ids but {bits.shape[0]} rows"
            )
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "input_ids", tuple(self.input_ids))

    @property
    def c(self) -> int:
        """Neuron count of the layer."""
        return int(self.bits.shape[1])

    def __len__(self) -> int:
        return len(self.input_ids)

    @classmethod
    def from_records(
        cls,
        records: Iterable[ActivationRecord],
        layer: str | None = None,
        threshold: float = 0.0,
    ) -> "ActivationMatrix":
        """Build indicators (activation > threshold) from raw records.

        ``layer`` may be omitted when the records cover a single layer.
        """
        records = list(records)
        layers = sorted({r.layer for r in records})
        if layer is None:
            if len(layers) > 1:
                raise ValidationError(
                    f"records cover layers {layers}; pass an explicit layer"
                )
            layer = layers[0] if layers else ""
        rows = [r for r in records if r.layer == layer]
        if layer and not rows and records:
            raise ValidationError(
                f"no records for layer '{layer}'; available: {layers}"
            )
        seen: set[str] = set()
        for r in rows:
            if r.input_id in seen:
                raise ValidationError(
                    f"duplicate activation record for input '{r.input_id}' layer '{layer}'"
                )
            seen.add(r.input_id)
        widths = {len(r.activations) for r in rows}
        if len(widths) > 1:
            raise ValidationError(
                f"layer '{layer}' rows disagree on vector length: {sorted(widths)}"
            )
        ids = tuple(r.input_id for r in rows)
        c = widths.pop() if widths else 0
        raw = np.array([r.activations for r in rows], dtype=np.float64).reshape(
            len(rows), c
        )
        return cls(layer=layer, input_ids=ids, bits=raw > threshold, threshold=threshold)


Cell = tuple[tuple[int, ...], tuple[bool, ...]]


@dataclass(frozen=True, slots=True)
class KActivationReport:
    layer: str
    k: int
    c: int
    occupied: int
    denominator: int
    cells: frozenset[Cell]

    @property
    def metric(self) -> Fraction:
        return Fraction(self.occupied, self.denominator)

    @property
    def value(self) -> float:
        return self.occupied / self.denominator

    @property
    def rational(self) -> str:
        return f"{self.occupied}/{self.denominator}"


def k_activation(
    acts: ActivationMatrix, k: int, allow_large: bool = False
) -> KActivationReport:
    """Witnessed (k-tuple, k-pattern) cells over C(c, k) * 2^k.

    k above 3 is refused unless ``allow_large`` is set, since the table
    size grows as C(c, k) * 2^k; the raised cap still warns about cost.
    """
    c = acts.c
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if c == 0:
        raise EmptyInputError("activation matrix has no neurons")
    if k > c:
        raise KTooLargeError(f"k={k} exceeds the layer's {c} neurons")
    if k > DEFAULT_MAX_K:
        if not allow_large:
            raise KTooLargeError(
                f"k={k} exceeds the default cap of {DEFAULT_MAX_K}; "
                f"pass allow_large=True to accept a table of C({c},{k})*2^{k} cells"
            )
        warnings.warn(
            f"k={k} builds a table of {comb(c, k) * 2 ** k} cells; this can be slow",
            stacklevel=2,
        )

    denominator = comb(c, k) * 2**k
    cells: set[Cell] = set()
    if len(acts) > 0:
        unique_rows = np.unique(acts.bits, axis=0)
        combos = list(itertools.combinations(range(c), k))
        for row in unique_rows:
            for combo in combos:
                pattern = tuple(bool(row[i]) for i in combo)
                cells.add((combo, pattern))
    return KActivationReport(
        layer=acts.layer,
        k=k,
        c=c,
        occupied=len(cells),
        denominator=denominator,
        cells=frozenset(cells),
    )


@dataclass(frozen=True, slots=True)
class PatternReport:
    layer: str
    gamma: int
    c: int
    group_sizes: tuple[int, ...]
    majority_index: int
    deviating: int
    total: int
    degenerate: bool
    scenario: Scenario | None = None

    @property
    def metric(self) -> Fraction:
        return Fraction(self.deviating, self.total)

    @property
    def value(self) -> float:
        return self.deviating / self.total

    @property
    def rational(self) -> str:
        return f"{self.deviating}/{self.total}"


def group_index(count: int, c: int, gamma: int) -> int:
    """1-based bucket of an activated-neuron count.

    Bucket i spans [c/gamma*(i-1), c/gamma*i), half-open so the buckets
    partition; the last bucket is right-closed to admit count == c.
    Computed in integers, so boundaries are exact.
    """
    return min(count * gamma // c + 1, gamma)


def pattern_metric(
    acts: ActivationMatrix,
    gamma: int,
    manifest: DatasetManifest | None = None,
    space: ScenarioSpace | None = None,
    allow_mixed: bool = False,
) -> PatternReport:
    """Input mass in buckets more than one away from the majority bucket.

    When ``manifest`` (and optionally ``space``) is given, the inputs must
    all carry one shared scenario; pass ``allow_mixed`` to skip the check.
    gamma <= 2 leaves every bucket adjacent to the majority, so the metric
    is structurally 0 and the report is flagged degenerate.
    """
    if gamma < 1:
        raise ValidationError(f"gamma must be >= 1, got {gamma}")
    n = len(acts)
    if n == 0:
        raise EmptyInputError("activation-pattern metric needs at least one input")

    scenario = None
    if manifest is not None:
        scenario = _common_scenario(acts.input_ids, manifest, space, allow_mixed)

    counts = acts.bits.sum(axis=1)
    sizes = [0] * gamma
    for count in counts:
        sizes[group_index(int(count), acts.c, gamma) - 1] += 1
    majority = max(range(1, gamma + 1), key=lambda i: (sizes[i - 1], -i))
    deviating = sum(
        sizes[i - 1] for i in range(1, gamma + 1) if abs(i - majority) > 1
    )
    return PatternReport(
        layer=acts.layer,
        gamma=gamma,
        c=acts.c,
        group_sizes=tuple(sizes),
        majority_index=majority,
        deviating=deviating,
        total=n,
        degenerate=gamma <= 2,
        scenario=scenario,
    )


def _common_scenario(
    input_ids: Sequence[str],
    manifest: DatasetManifest,
    space: ScenarioSpace | None,
    allow_mixed: bool,
) -> Scenario | None:
    scenarios: dict[Scenario, str] = {}
    missing: list[str] = []
    for input_id in input_ids:
        point = manifest.get(input_id)
        if point is None or point.scenario is None:
            missing.append(input_id)
            continue
        if space is not None:
            point.scenario.validate_against(space)
        scenarios.setdefault(point.scenario, input_id)
    if allow_mixed:
        return next(iter(scenarios), None)
    if missing:
        raise MixedScenarioError(
            f"{len(missing)} input(s) lack a scenario label (first: '{missing[0]}')"
        )
    if len(scenarios) > 1:
        examples = sorted(s.label() for s in scenarios)
        raise MixedScenarioError(
            f"inputs span {len(scenarios)} scenarios, e.g. {examples[0]} vs {examples[1]}"
        )
    return next(iter(scenarios), None)
