"""Fixtures: sample images, a manifest, and a saved demo-model state dict."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image


def save_png(path: Path, seed: int, size=(32, 32)) -> None:
    rng = np.random.default_rng(seed)
    data = (rng.random((*size, 3)) * 255).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(path, format="PNG")


@pytest.fixture
def images(tmp_path) -> Path:
    for i in range(5):
        save_png(tmp_path / f"img{i}.png", seed=i)
    return tmp_path


@pytest.fixture
def manifest(images) -> Path:
    path = images / "data.jsonl"
    rows = [{"id": f"p{i}", "image_path": f"img{i}.png"} for i in range(5)]
    path.write_text("".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8")
    return path


@pytest.fixture
def demo_state(tmp_path) -> Path:
    import torch

    from oracle_adapter.models import build_demo_net

    net = build_demo_net(seed=7)
    path = tmp_path / "demo_state.pt"
    torch.save(net.state_dict(), path)
    return path


def adapter_cmd(*args: str) -> list[str]:
    return [sys.executable, "-m", "oracle_adapter.cli", *args]
