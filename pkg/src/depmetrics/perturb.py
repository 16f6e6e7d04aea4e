"""Image perturbation transformers and the adversarial confidence loss.

Every transformer is deterministic given (image, epsilon, seed) and
returns an image of the same pixel dimensions with intensities clamped
to [0, 1]. Epsilon 0 is always the identity. Gradient-based attacks are
accepted only as kind "external": the caller supplies pre-perturbed
images or pre-scored prediction records under that transformer name.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy import ndimage

from .errors import (
    BadEpsilonError,
    DuplicateIdError,
    NoBaselineError,
    NoPerturbedError,
    ValidationError,
)
from .model import IDENTITY_TRANSFORM, PredictionRecord

KINDS = ("rotation", "gaussian-noise", "brightness", "contrast", "gray-occlusion", "external")

# Documented epsilon unit and accepted range per kind.
EPSILON_RANGES: dict[str, tuple[float, float, str]] = {
    "rotation": (0.0, 360.0, "counter-clockwise degrees"),
    "gaussian-noise": (0.0, 1.0, "noise sigma in [0,1] intensity units"),
    "brightness": (0.0, 1.0, "additive intensity shift"),
    "contrast": (0.0, 10.0, "contrast factor delta; factor = 1 + epsilon"),
    "gray-occlusion": (0.0, 1.0, "patch side as a fraction of the shorter image side"),
    "external": (0.0, float("inf"), "opaque; interpreted by the external tool"),
}


@dataclass(frozen=True, slots=True)
class Transformer:
    """A named perturbation; ``params`` tweaks kind-specific details."""

    name: str
    kind: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.name:
            raise ValidationError("transformer name must be nonempty")
        if self.kind not in KINDS:
            raise ValidationError(
                f"unknown transformer kind '{self.kind}'; expected one of {KINDS}"
            )
        object.__setattr__(self, "params", dict(self.params))


def identity_transformer() -> Transformer:
    return Transformer(IDENTITY_TRANSFORM, "external")


def _check_epsilon(t: Transformer, epsilon: float) -> float:
    epsilon = float(epsilon)
    low, high, unit = EPSILON_RANGES[t.kind]
    if not (low <= epsilon <= high) or np.isnan(epsilon):
        raise BadEpsilonError(
            f"epsilon {epsilon} outside [{low}, {high}] for kind '{t.kind}' ({unit})"
        )
    return epsilon


def apply_transform(
    image: np.ndarray, t: Transformer, epsilon: float, seed: int = 0
) -> np.ndarray:
    """Apply one transformer; pure in (image, epsilon, seed)."""
    epsilon = _check_epsilon(t, epsilon)
    image = np.asarray(image, dtype=np.float64)
    if image.ndim not in (2, 3):
        raise ValidationError(f"image must be 2-D or 3-D, got shape {image.shape}")
    if epsilon == 0.0:
        return image.copy()

    if t.kind == "rotation":
        axes = (1, 0)
        out = ndimage.rotate(
            image, angle=epsilon, axes=axes, reshape=False, order=1,
            mode="constant", cval=float(t.params.get("fill", 0.5)),
        )
    elif t.kind == "gaussian-noise":
        rng = np.random.default_rng(seed)
        out = image + rng.normal(0.0, epsilon, size=image.shape)
    elif t.kind == "brightness":
        out = image + epsilon
    elif t.kind == "contrast":
        out = (image - 0.5) * (1.0 + epsilon) + 0.5
    elif t.kind == "gray-occlusion":
        side = int(round(epsilon * min(image.shape[0], image.shape[1])))
        out = image.copy()
        if side > 0:
            rng = np.random.default_rng(seed)
            y = int(rng.integers(0, image.shape[0] - side + 1))
            x = int(rng.integers(0, image.shape[1] - side + 1))
            out[y : y + side, x : x + side, ...] = float(t.params.get("fill", 0.5))
    else:  # external
        raise ValidationError(
            f"transformer '{t.name}' is external; supply pre-perturbed inputs instead"
        )
    return np.clip(out, 0.0, 1.0)


def scalar_output(record: PredictionRecord, target: str | None) -> float:
    """The scalar the loss compares: one class's probability, larger is better."""
    if record.outputs is None:
        raise ValidationError(
            f"record for '{record.input_id}' has detections; the confidence loss "
            "needs class-probability outputs"
        )
    if target is None:
        if len(record.outputs) != 1:
            raise ValidationError(
                f"record for '{record.input_id}' has {len(record.outputs)} outputs; "
                "pass a target class"
            )
        return next(iter(record.outputs.values()))
    return record.outputs.get(target, 0.0)


@dataclass(frozen=True, slots=True)
class InputLoss:
    worst_transform: str
    delta: float


@dataclass(frozen=True, slots=True)
class AdvReport:
    epsilon: float
    target: str | None
    per_input: Mapping[str, InputLoss]
    metric: float

    def __post_init__(self):
        object.__setattr__(self, "per_input", dict(self.per_input))


def adv_loss(
    originals: Iterable[PredictionRecord],
    perturbed: Iterable[PredictionRecord],
    target: str | None = None,
) -> AdvReport:
    """Mean over inputs of the worst output drop across transformers.

    Per input the delta is min over transformers of
    score(transformed) - score(original); the mean keeps its sign, so a
    perturbation that helps every input yields a positive metric.
    """
    baselines: dict[str, float] = {}
    for record in originals:
        if not record.is_identity:
            raise ValidationError(
                f"original record for '{record.input_id}' is tagged "
                f"'{record.transform}', expected '{IDENTITY_TRANSFORM}'"
            )
        if record.input_id in baselines:
            raise DuplicateIdError(
                f"duplicate identity record for input '{record.input_id}'"
            )
        baselines[record.input_id] = scalar_output(record, target)

    candidates: dict[str, list[tuple[str, float]]] = {}
    epsilons: set[float] = set()
    for record in perturbed:
        candidates.setdefault(record.input_id, []).append(
            (record.transform, scalar_output(record, target))
        )
        if not record.is_identity:
            epsilons.add(record.epsilon)
    if len(epsilons) > 1:
        raise ValidationError(
            f"perturbed records mix epsilons {sorted(epsilons)}; score one epsilon per run"
        )

    ids = sorted(set(baselines) | set(candidates))
    if not ids:
        raise ValidationError("no prediction records to score")
    for input_id in ids:
        if input_id not in baselines:
            raise NoBaselineError(f"no identity record for input '{input_id}'")
    per_input: dict[str, InputLoss] = {}
    for input_id in ids:
        if input_id not in candidates:
            raise NoPerturbedError(f"no perturbed records for input '{input_id}'")
        base = baselines[input_id]
        deltas = sorted(
            (value - base, name) for name, value in candidates[input_id]
        )
        delta, name = deltas[0]
        per_input[input_id] = InputLoss(worst_transform=name, delta=delta)

    metric = sum(loss.delta for loss in per_input.values()) / len(per_input)
    return AdvReport(
        epsilon=max(epsilons) if epsilons else 0.0,
        target=target,
        per_input=per_input,
        metric=metric,
    )
