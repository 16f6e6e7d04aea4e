"""Model backends behind the oracle protocol.

A backend scores one image file and returns either a class-probability
map or a list of detections. Two synthetic modes (constant, geometric)
need no ML framework and exist so protocol-level tests run without any
model download; real inference wraps torch modules in deterministic
eval mode.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

OCC_TAG = re.compile(r"__occ_y(\d+)_x(\d+)_s(\d+)\.png$")

DEMO_CLASSES = ("car", "pedestrian", "background")


class ModelError(Exception):
    """Model loading or configuration failure."""


@dataclass(frozen=True)
class AdapterConfig:
    model: str
    mode: str = "classify"
    layer: str | None = None
    device: str = "cpu"
    classes: tuple[str, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("classify", "detect"):
            raise ModelError(f"mode must be classify or detect, got '{self.mode}'")


class ConstantModel:
    """Answers every request with a fixed probability for the first class."""

    def __init__(self, p: float, classes=("car", "background")):
        if not (0.0 <= p <= 1.0):
            raise ModelError(f"constant probability must be in [0, 1], got {p}")
        self.p = round(p, 12)
        self.classes = classes

    def classify(self, image_path: str) -> dict[str, float]:
        rest = round((1.0 - self.p) / (len(self.classes) - 1), 12)
        out = {label: rest for label in self.classes[1:]}
        out[self.classes[0]] = self.p
        return out

    def detect(self, image_path: str):
        raise ModelError("constant model has no detection head")


class GeometricModel:
    """Scores 1 - (overlap fraction of a filename-tagged occluder with a box).

    Occluded frames carry their geometry as __occ_y{y}_x{x}_s{side}.png;
    untagged images score 1.0. Detection mode answers one box (the
    configured one) with the same probability.
    """

    def __init__(self, box: tuple[float, float, float, float]):
        self.box = box

    def _value(self, image_path: str) -> float:
        tag = OCC_TAG.search(image_path)
        if tag is None:
            return 1.0
        y, x, side = (int(g) for g in tag.groups())
        x0, y0, x1, y1 = self.box
        iw = max(0.0, min(x + side, x1) - max(x, x0))
        ih = max(0.0, min(y + side, y1) - max(y, y0))
        return round(1.0 - (iw * ih) / float(side * side), 12)

    def classify(self, image_path: str) -> dict[str, float]:
        value = self._value(image_path)
        return {"car": value, "background": round(1.0 - value, 12)}

    def detect(self, image_path: str):
        value = self._value(image_path)
        return [
            {
                "box": list(self.box),
                "class_probs": {"car": value, "background": round(1.0 - value, 12)},
            }
        ]


def _load_tensor(image_path: str, device: str):
    import numpy as np
    import torch
    from PIL import Image

    with Image.open(image_path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    tensor = torch.from_numpy(arr).permute(2, 0, 1).unsqueeze(0)
    return tensor.to(device)


def build_demo_net(classes=DEMO_CLASSES, seed: int = 0):
    """Small CNN with stable layer names; adaptive pooling makes the
    fully-connected widths independent of the input resolution."""
    import torch
    from torch import nn

    torch.manual_seed(seed)
    net = nn.Sequential()
    net.add_module("conv1", nn.Conv2d(3, 8, 3, padding=1))
    net.add_module("relu1", nn.ReLU())
    net.add_module("pool", nn.AdaptiveAvgPool2d(4))
    net.add_module("flatten", nn.Flatten())
    net.add_module("fc1", nn.Linear(8 * 16, 32))
    net.add_module("relu2", nn.ReLU())
    net.add_module("fc2", nn.Linear(32, len(classes)))
    return net


class TorchClassifier:
    """Deterministic eval-mode wrapper around a torch module."""

    def __init__(self, module, classes: tuple[str, ...], device: str = "cpu", seed: int = 0):
        import torch

        torch.manual_seed(seed)
        self.device = device
        self.module = module.to(device).eval()
        self.classes = classes

    def classify(self, image_path: str) -> dict[str, float]:
        import torch

        tensor = _load_tensor(image_path, self.device)
        with torch.no_grad():
            logits = self.module(tensor)
        probs = torch.softmax(logits.flatten(), dim=0).tolist()
        if len(probs) != len(self.classes):
            raise ModelError(
                f"model emits {len(probs)} outputs but {len(self.classes)} "
                "class names were configured"
            )
        return {label: float(p) for label, p in zip(self.classes, probs)}

    def detect(self, image_path: str):
        import torch

        tensor = _load_tensor(image_path, self.device)
        with torch.no_grad():
            result = self.module(tensor)
        if isinstance(result, (list, tuple)):
            result = result[0]
        if not isinstance(result, dict) or "boxes" not in result:
            raise ModelError(
                "detection needs a torchvision-style model returning "
                "{boxes, labels, scores}"
            )
        detections = []
        for box, label, score in zip(
            result["boxes"].tolist(), result["labels"].tolist(), result["scores"].tolist()
        ):
            index = int(label)
            name = (
                self.classes[index]
                if 0 <= index < len(self.classes)
                else f"class{index}"
            )
            detections.append({"box": list(box), "class_probs": {name: float(score)}})
        return detections

    def named_layers(self) -> list[str]:
        return [name for name, _ in self.module.named_modules() if name]

    def layer_activations(self, layer: str, image_path: str) -> list[float]:
        """Flattened output of one named submodule for one image."""
        import torch

        layers = self.named_layers()
        if layer not in layers:
            raise ModelError(
                f"layer '{layer}' not found; available layers: {', '.join(layers)}"
            )
        captured = {}
        module = dict(self.module.named_modules())[layer]

        def hook(_module, _inputs, output):
            captured["value"] = output.detach().flatten().tolist()

        handle = module.register_forward_hook(hook)
        try:
            with torch.no_grad():
                self.module(_load_tensor(image_path, self.device))
        finally:
            handle.remove()
        if "value" not in captured:
            raise ModelError(f"layer '{layer}' did not run during the forward pass")
        return [float(v) for v in captured["value"]]


def load_model(config: AdapterConfig):
    """Build the backend for a model source string.

    Sources: "constant:P", "geometric:X0,Y0,X1,Y1", "demo[:statedict.pt]",
    "torchvision:NAME" (architecture only, seeded random init), or a
    TorchScript file path.
    """
    source = config.model
    kind, _, params = source.partition(":")
    if kind == "constant":
        try:
            return ConstantModel(float(params))
        except ValueError:
            raise ModelError(f"constant mode needs a probability, got '{params}'") from None
    if kind == "geometric":
        try:
            box = tuple(float(v) for v in params.split(","))
        except ValueError:
            box = ()
        if len(box) != 4 or box[0] >= box[2] or box[1] >= box[3]:
            raise ModelError(f"geometric mode needs x0,y0,x1,y1 with x0<x1, y0<y1, got '{params}'")
        return GeometricModel(box)

    if kind == "demo":
        import torch

        classes = config.classes or DEMO_CLASSES
        net = build_demo_net(classes, seed=config.seed)
        if params:
            state_path = Path(params)
            if not state_path.exists():
                raise ModelError(f"demo state dict not found: {state_path}")
            net.load_state_dict(torch.load(state_path, map_location=config.device))
        return TorchClassifier(net, classes, device=config.device, seed=config.seed)

    if kind == "torchvision":
        try:
            from torchvision.models import get_model
        except ImportError:
            raise ModelError("torchvision is not installed") from None
        classes = config.classes
        if classes is None:
            raise ModelError("torchvision models need --classes (one name per output)")
        module = get_model(params, weights=None, num_classes=len(classes))
        return TorchClassifier(module, classes, device=config.device, seed=config.seed)

    path = Path(source)
    if path.exists():
        import torch

        try:
            module = torch.jit.load(str(path), map_location=config.device)
        except Exception as e:
            raise ModelError(f"cannot load TorchScript model {path}: {e}") from None
        classes = config.classes
        if classes is None:
            raise ModelError("TorchScript models need --classes (one name per output)")
        return TorchClassifier(module, classes, device=config.device, seed=config.seed)
    raise ModelError(f"unknown model source '{source}'")
