"""File formats: scenario-space JSON and the newline-delimited record files.

Every tabular input is one JSON object per line. Loaders validate each
record and report failures with the file path and line number; writers
emit canonical (sorted-key, compact) lines so equal data always produces
identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Iterator

from .errors import MalformedLineError, ValidationError
from .model import (
    ActivationRecord,
    BBox,
    Condition,
    DataPoint,
    DatasetManifest,
    Detection,
    GroundTruth,
    ObjectLabel,
    PredictionRecord,
    Scenario,
    ScenarioSpace,
)


def _read_text(path) -> str:
    path = Path(path)
    try:
        return path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ValidationError("file not found", path=path) from None
    except OSError as e:
        raise ValidationError(f"unreadable: {e}", path=path) from None


def _iter_jsonl(path) -> Iterator[tuple[int, dict]]:
    """Yield (line_no, object) for every nonblank line; 1-based numbering."""
    text = _read_text(path)
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise MalformedLineError(f"invalid JSON ({e.msg})", path=path, line_no=line_no) from None
        if not isinstance(obj, dict):
            raise MalformedLineError("line must be a JSON object", path=path, line_no=line_no)
        yield line_no, obj


def canonical_line(obj: Any) -> str:
    """One canonical JSONL line, sorted keys, compact separators."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _require(obj: dict, key: str, kind, what: str):
    if key not in obj:
        raise MalformedLineError(f"{what} is missing '{key}'")
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        raise MalformedLineError(f"{what} field '{key}' has wrong type")
    return value


# ---------------------------------------------------------------------------
# Scenario space
# ---------------------------------------------------------------------------

def load_scenario_space(path) -> ScenarioSpace:
    """Parse {"conditions": [{"name":..., "values":[...]}, ...]}."""
    text = _read_text(path)
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError(f"invalid JSON ({e.msg})", path=path) from None
    if not isinstance(obj, dict) or not isinstance(obj.get("conditions"), list):
        raise ValidationError("scenario space must be {'conditions': [...]}", path=path)
    try:
        conditions = tuple(
            Condition(
                name=str(_require(c, "name", str, "condition")),
                values=tuple(str(v) for v in _require(c, "values", list, "condition")),
            )
            for c in obj["conditions"]
        )
        return ScenarioSpace(conditions)
    except ValidationError as e:
        raise e.at(path) from None


def scenario_space_to_dict(space: ScenarioSpace) -> dict:
    return {
        "conditions": [
            {"name": c.name, "values": list(c.values)} for c in space.conditions
        ]
    }


# ---------------------------------------------------------------------------
# Dataset manifest
# ---------------------------------------------------------------------------

def _parse_ground_truth(obj: Any) -> GroundTruth:
    if not isinstance(obj, dict):
        raise MalformedLineError("ground_truth must be an object")
    if "class_label" in obj and "objects" in obj:
        raise ValidationError("ground_truth cannot carry both class_label and objects")
    if "class_label" in obj:
        mask = obj.get("mask_path")
        return GroundTruth(
            class_label=str(obj["class_label"]),
            mask_path=None if mask is None else str(mask),
        )
    if "objects" in obj:
        if not isinstance(obj["objects"], list):
            raise MalformedLineError("ground_truth objects must be a list")
        objects = []
        for entry in obj["objects"]:
            if not isinstance(entry, dict):
                raise MalformedLineError("ground-truth object must be an object")
            mask = entry.get("mask_path")
            objects.append(
                ObjectLabel(
                    class_label=str(_require(entry, "class_label", None, "ground-truth object")),
                    box=BBox.from_list(_require(entry, "box", list, "ground-truth object")),
                    mask_path=None if mask is None else str(mask),
                )
            )
        return GroundTruth(objects=tuple(objects))
    raise MalformedLineError("ground_truth needs class_label or objects")


def _parse_point(obj: dict) -> DataPoint:
    point_id = _require(obj, "id", str, "manifest line")
    scenario = None
    if obj.get("scenario") is not None:
        raw = obj["scenario"]
        if not isinstance(raw, dict):
            raise MalformedLineError("scenario must be an object of condition: value")
        scenario = Scenario.of({str(k): str(v) for k, v in raw.items()})
    ground_truth = None
    if obj.get("ground_truth") is not None:
        ground_truth = _parse_ground_truth(obj["ground_truth"])
    image_path = obj.get("image_path")
    return DataPoint(
        id=point_id,
        image_path=None if image_path is None else str(image_path),
        scenario=scenario,
        ground_truth=ground_truth,
    )


def load_manifest(path, space: ScenarioSpace | None = None) -> DatasetManifest:
    """Load and validate a manifest; scenarios are checked against ``space`` when given."""
    points: list[DataPoint] = []
    seen: dict[str, int] = {}
    for line_no, obj in _iter_jsonl(path):
        try:
            point = _parse_point(obj)
            if point.scenario is not None and space is not None:
                point.scenario.validate_against(space)
        except ValidationError as e:
            raise e.at(path, line_no) from None
        if point.id in seen:
            raise ValidationError(
                f"duplicate data point id '{point.id}' (first seen at line {seen[point.id]})",
                path=path,
                line_no=line_no,
            )
        seen[point.id] = line_no
        points.append(point)
    return DatasetManifest(tuple(points), base_dir=str(Path(path).parent))


def point_to_dict(point: DataPoint) -> dict:
    out: dict[str, Any] = {"id": point.id}
    if point.image_path is not None:
        out["image_path"] = point.image_path
    if point.scenario is not None:
        out["scenario"] = point.scenario.as_dict()
    if point.ground_truth is not None:
        gt = point.ground_truth
        if gt.class_label is not None:
            entry: dict[str, Any] = {"class_label": gt.class_label}
            if gt.mask_path is not None:
                entry["mask_path"] = gt.mask_path
            out["ground_truth"] = entry
        else:
            objects = []
            for o in gt.objects:
                entry: dict[str, Any] = {"class_label": o.class_label, "box": o.box.to_list()}
                if o.mask_path is not None:
                    entry["mask_path"] = o.mask_path
                objects.append(entry)
            out["ground_truth"] = {"objects": objects}
    return out


def write_manifest(manifest: DatasetManifest, path) -> None:
    lines = [canonical_line(point_to_dict(p)) for p in manifest]
    Path(path).write_text("".join(s + "\n" for s in lines), encoding="utf-8")


# ---------------------------------------------------------------------------
# Activation records
# ---------------------------------------------------------------------------

def load_activations(path) -> list[ActivationRecord]:
    """Load activation dumps; rows of one layer must share a vector length."""
    records: list[ActivationRecord] = []
    widths: dict[str, tuple[int, int]] = {}
    for line_no, obj in _iter_jsonl(path):
        try:
            record = ActivationRecord(
                input_id=_require(obj, "input_id", str, "activation line"),
                layer=_require(obj, "layer", str, "activation line"),
                activations=_require(obj, "activations", list, "activation line"),
            )
        except ValidationError as e:
            raise e.at(path, line_no) from None
        c = len(record.activations)
        if record.layer in widths and widths[record.layer][0] != c:
            first_c, first_line = widths[record.layer]
            raise ValidationError(
                f"layer '{record.layer}' has {c} activations here but "
                f"{first_c} at line {first_line}",
                path=path,
                line_no=line_no,
            )
        widths.setdefault(record.layer, (c, line_no))
        records.append(record)
    return records


def write_activations(records: Iterable[ActivationRecord], path) -> None:
    lines = [
        canonical_line(
            {"input_id": r.input_id, "layer": r.layer, "activations": list(r.activations)}
        )
        for r in records
    ]
    Path(path).write_text("".join(s + "\n" for s in lines), encoding="utf-8")


# ---------------------------------------------------------------------------
# Prediction records
# ---------------------------------------------------------------------------

def _parse_prediction(obj: dict) -> PredictionRecord:
    detections = None
    if obj.get("detections") is not None:
        raw = obj["detections"]
        if not isinstance(raw, list):
            raise MalformedLineError("detections must be a list")
        detections = tuple(
            Detection(
                box=BBox.from_list(_require(d, "box", list, "detection")),
                class_probs=_require(d, "class_probs", dict, "detection"),
            )
            for d in raw
        )
    return PredictionRecord(
        input_id=_require(obj, "input_id", str, "prediction line"),
        transform=str(obj.get("transform", "identity")),
        epsilon=obj.get("epsilon", 0.0),
        outputs=obj.get("outputs"),
        detections=detections,
    )


def load_predictions(path) -> list[PredictionRecord]:
    records = []
    for line_no, obj in _iter_jsonl(path):
        try:
            records.append(_parse_prediction(obj))
        except ValidationError as e:
            raise e.at(path, line_no) from None
    return records


def prediction_to_dict(record: PredictionRecord) -> dict:
    out: dict[str, Any] = {
        "input_id": record.input_id,
        "transform": record.transform,
        "epsilon": record.epsilon,
    }
    if record.outputs is not None:
        out["outputs"] = dict(record.outputs)
    else:
        out["detections"] = [
            {"box": d.box.to_list(), "class_probs": dict(d.class_probs)}
            for d in record.detections
        ]
    return out


def write_predictions(records: Iterable[PredictionRecord], path) -> None:
    lines = [canonical_line(prediction_to_dict(r)) for r in records]
    Path(path).write_text("".join(s + "\n" for s in lines), encoding="utf-8")
