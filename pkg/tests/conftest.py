"""Shared fixtures: the worked three-condition space, file builders, fake oracles."""

from __future__ import annotations

import json
import shlex
import sys
import textwrap
from pathlib import Path

import numpy as np
import pytest

from depmetrics.model import (
    Condition,
    DataPoint,
    DatasetManifest,
    Scenario,
    ScenarioSpace,
)
from depmetrics.occlusion import OCC_TAG_RE
from depmetrics.oracle import OracleResponse
from depmetrics.raster import save_image, save_mask

REPO_ROOT = Path(__file__).resolve().parent.parent
STUB_ORACLE = REPO_ROOT / "scripts" / "stub_oracle.py"


@pytest.fixture
def road_space() -> ScenarioSpace:
    """Weather x surface x orientation, sizes (3, 3, 2)."""
    return ScenarioSpace(
        (
            Condition("weather", ("sunny", "cloudy", "rainy")),
            Condition("surface", ("stone", "mud", "tarmac")),
            Condition("orientation", ("straight", "curvy")),
        )
    )


def scenario_of(weather: str, surface: str, orientation: str) -> Scenario:
    return Scenario.of(
        {"weather": weather, "surface": surface, "orientation": orientation}
    )


@pytest.fixture
def two_point_manifest() -> DatasetManifest:
    """The two scenarios that occupy 2 cells in each of the 3 pair tables."""
    return DatasetManifest(
        (
            DataPoint("p1", scenario=scenario_of("sunny", "stone", "straight")),
            DataPoint("p2", scenario=scenario_of("rainy", "tarmac", "curvy")),
        )
    )


def stub_oracle_cmd(*args: str) -> list[str]:
    return [sys.executable, str(STUB_ORACLE), *args]


def write_script(tmp_path: Path, body: str, name: str = "stub.py") -> list[str]:
    path = tmp_path / name
    path.write_text(textwrap.dedent(body), encoding="utf-8")
    return [sys.executable, str(path)]


class FakeOracle:
    """In-process oracle: one response per request via a scoring function."""

    def __init__(self, fn):
        self.fn = fn
        self.queries = 0

    def query_batch(self, requests, parallelism=1):
        self.queries += len(requests)
        return [self.fn(r) for r in requests]


def constant_oracle(p: float, label: str = "car") -> FakeOracle:
    return FakeOracle(
        lambda r: OracleResponse(
            r.request_id, outputs={label: p, "background": 1.0 - p}
        )
    )


def geometric_oracle(box: tuple[float, float, float, float], label: str = "car") -> FakeOracle:
    """Score = 1 - (overlap fraction of the filename-tagged occluder with box)."""

    def fn(request):
        tag = OCC_TAG_RE.search(request.image_path)
        if tag is None:
            value = 1.0
        else:
            y, x, side = (int(g) for g in tag.groups())
            x0, y0, x1, y1 = box
            iw = max(0.0, min(x + side, x1) - max(x, x0))
            ih = max(0.0, min(y + side, y1) - max(y, y0))
            value = 1.0 - (iw * ih) / float(side * side)
        return OracleResponse(
            request.request_id, outputs={label: value, "background": 1.0 - value}
        )

    return FakeOracle(fn)


SPACE_JSON = {
    "conditions": [
        {"name": "weather", "values": ["sunny", "cloudy", "rainy"]},
        {"name": "surface", "values": ["stone", "mud", "tarmac"]},
        {"name": "orientation", "values": ["straight", "curvy"]},
    ]
}


def _jsonl(path: Path, rows) -> Path:
    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    return path


def build_project(root: Path) -> Path:
    """Two labeled points with images, masks, activations and predictions."""
    (root / "space.json").write_text(json.dumps(SPACE_JSON), encoding="utf-8")

    mask = np.zeros((60, 60), dtype=bool)
    mask[20:40, 20:40] = True
    for name in ("img1", "img2"):
        save_image(np.full((60, 60), 0.5), root / f"{name}.png")
        save_mask(mask, root / f"{name}_mask.png")

    _jsonl(
        root / "data.jsonl",
        [
            {
                "id": "p1",
                "image_path": "img1.png",
                "scenario": {"weather": "sunny", "surface": "stone", "orientation": "straight"},
                "ground_truth": {"class_label": "car", "mask_path": "img1_mask.png"},
            },
            {
                "id": "p2",
                "image_path": "img2.png",
                "scenario": {"weather": "rainy", "surface": "tarmac", "orientation": "curvy"},
                "ground_truth": {"class_label": "car", "mask_path": "img2_mask.png"},
            },
        ],
    )
    _jsonl(
        root / "acts.jsonl",
        [
            {"input_id": "p1", "layer": "fc", "activations": [1.5, 0.0, -0.3, 2.0]},
            {"input_id": "p2", "layer": "fc", "activations": [0.0, 0.7, 0.0, 0.0]},
        ],
    )
    _jsonl(
        root / "preds.jsonl",
        [
            {"input_id": "p1", "transform": "identity", "epsilon": 0.0,
             "outputs": {"car": 0.91, "background": 0.09}},
            {"input_id": "p2", "transform": "identity", "epsilon": 0.0,
             "outputs": {"car": 0.8, "background": 0.2}},
            {"input_id": "p1", "transform": "fgsm-external", "epsilon": 0.1,
             "outputs": {"car": 0.69, "background": 0.31}},
            {"input_id": "p1", "transform": "distortion", "epsilon": 0.1,
             "outputs": {"car": 0.84, "background": 0.16}},
            {"input_id": "p2", "transform": "fgsm-external", "epsilon": 0.1,
             "outputs": {"car": 0.79, "background": 0.21}},
        ],
    )
    (root / "transforms.json").write_text(
        json.dumps(
            {
                "transforms": [
                    {"name": "bright", "kind": "brightness"},
                    {"name": "patch", "kind": "gray-occlusion"},
                ]
            }
        ),
        encoding="utf-8",
    )
    (root / "weights.json").write_text(
        json.dumps({"classes": ["car", "background"], "weights": [[0, 3], [1, 0]]}),
        encoding="utf-8",
    )
    return root


def write_run_config(project: Path) -> Path:
    oracle = shlex.join([sys.executable, str(STUB_ORACLE), "geometric:20,20,40,40"])
    config = f"""
[inputs]
space = "space.json"
manifest = "data.jsonl"
activations = "acts.jsonl"
predictions = "preds.jsonl"
weights = "weights.json"

[oracle]
command = {json.dumps(oracle)}
parallelism = 4

[scene]
suggest = 2

[neuron]
layer = "fc"
k = 2

[pattern]
gamma = 3
allow_mixed = true

[adv]
transforms = "transforms.json"
epsilon = 0.1
target = "car"
seed = 0

[occlusion]
size = 20
stride = 20
rho = 0.5
rho_sweep = "0:1:0.25"

[confusion]
threshold = 0.5

[degrade]
base = "accuracy"

[output]
out = "report.json"
md = "report.md"
svg = "svg"
"""
    path = project / "run.toml"
    path.write_text(config, encoding="utf-8")
    return path
