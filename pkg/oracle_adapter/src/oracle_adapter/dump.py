"""Activation dumps: one JSONL record per manifest input for one layer.

Reads the dataset manifest format ({"id", "image_path", ...} per line)
and writes activation lines ({"input_id", "layer", "activations"}), the
file contracts shared with the metrics engine.
"""

from __future__ import annotations

import json
from pathlib import Path

from .models import AdapterConfig, ModelError, TorchClassifier, load_model


def iter_manifest(path) -> list[tuple[str, str]]:
    """(id, resolved image path) per manifest line that carries an image."""
    path = Path(path)
    entries = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ModelError(f"{path}:{line_no}: invalid JSON ({e.msg})") from None
        if not isinstance(obj, dict) or not isinstance(obj.get("id"), str):
            raise ModelError(f"{path}:{line_no}: manifest line needs a string id")
        image = obj.get("image_path")
        if image is None:
            continue
        image_path = Path(image)
        if not image_path.is_absolute():
            image_path = path.parent / image_path
        entries.append((obj["id"], str(image_path)))
    return entries


def dump_activations(config: AdapterConfig, manifest_path, out_path) -> int:
    """Write one activation record per image-bearing input; returns the count."""
    if config.layer is None:
        raise ModelError("activation dumps need a layer name")
    backend = load_model(config)
    if not isinstance(backend, TorchClassifier):
        raise ModelError(
            "synthetic models have no layers; activation dumps need a torch model "
            "(available layers: none)"
        )
    layers = backend.named_layers()
    if config.layer not in layers:
        raise ModelError(
            f"layer '{config.layer}' not found; available layers: {', '.join(layers)}"
        )

    lines = []
    width = None
    for input_id, image_path in iter_manifest(manifest_path):
        activations = backend.layer_activations(config.layer, image_path)
        if width is None:
            width = len(activations)
        elif len(activations) != width:
            raise ModelError(
                f"layer '{config.layer}' width changed from {width} to "
                f"{len(activations)} at input '{input_id}'; dump a layer whose "
                "size does not depend on the image resolution"
            )
        lines.append(
            json.dumps(
                {
                    "input_id": input_id,
                    "layer": config.layer,
                    "activations": activations,
                },
                sort_keys=True,
                separators=(",", ":"),
            )
        )
    Path(out_path).write_text("".join(s + "\n" for s in lines), encoding="utf-8")
    return len(lines)
