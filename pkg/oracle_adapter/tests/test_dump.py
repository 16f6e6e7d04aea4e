"""Activation dumps: shape, determinism, layer discovery."""

from __future__ import annotations

import json
import subprocess

import pytest

from oracle_adapter.dump import dump_activations
from oracle_adapter.models import AdapterConfig, ModelError

from conftest import adapter_cmd


def read_jsonl(path):
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]


class TestDump:
    def test_five_inputs_constant_width(self, manifest, tmp_path):
        out = tmp_path / "acts.jsonl"
        count = dump_activations(
            AdapterConfig(model="demo", layer="relu2"), manifest, out
        )
        assert count == 5
        rows = read_jsonl(out)
        assert [r["input_id"] for r in rows] == [f"p{i}" for i in range(5)]
        assert all(r["layer"] == "relu2" for r in rows)
        assert all(len(r["activations"]) == 32 for r in rows)

    def test_relu_layer_nonnegative(self, manifest, tmp_path):
        out = tmp_path / "acts.jsonl"
        dump_activations(AdapterConfig(model="demo", layer="relu2"), manifest, out)
        for row in read_jsonl(out):
            assert all(v >= 0.0 for v in row["activations"])

    def test_same_image_twice_identical_vectors(self, images, tmp_path):
        manifest = images / "twice.jsonl"
        manifest.write_text(
            json.dumps({"id": "a", "image_path": "img0.png"}) + "\n"
            + json.dumps({"id": "b", "image_path": "img0.png"}) + "\n",
            encoding="utf-8",
        )
        out = tmp_path / "acts.jsonl"
        dump_activations(AdapterConfig(model="demo", layer="fc1"), manifest, out)
        rows = read_jsonl(out)
        assert rows[0]["activations"] == rows[1]["activations"]

    def test_repeat_run_is_deterministic(self, manifest, tmp_path):
        config = AdapterConfig(model="demo", layer="relu2")
        out1, out2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        dump_activations(config, manifest, out1)
        dump_activations(config, manifest, out2)
        assert out1.read_bytes() == out2.read_bytes()

    def test_missing_layer_lists_available(self, manifest, tmp_path):
        with pytest.raises(ModelError) as err:
            dump_activations(
                AdapterConfig(model="demo", layer="bogus"), manifest, tmp_path / "x.jsonl"
            )
        message = str(err.value)
        assert "available layers" in message
        assert "relu2" in message and "conv1" in message

    def test_synthetic_model_has_no_layers(self, manifest, tmp_path):
        with pytest.raises(ModelError, match="no layers"):
            dump_activations(
                AdapterConfig(model="constant:0.5", layer="fc1"),
                manifest,
                tmp_path / "x.jsonl",
            )

    def test_state_dict_round_trip(self, manifest, tmp_path, demo_state):
        out1 = tmp_path / "a.jsonl"
        out2 = tmp_path / "b.jsonl"
        config = AdapterConfig(model=f"demo:{demo_state}", layer="relu2")
        dump_activations(config, manifest, out1)
        dump_activations(config, manifest, out2)
        assert out1.read_bytes() == out2.read_bytes()
        # a different seed's weights give different activations
        other = AdapterConfig(model="demo", layer="relu2", seed=0)
        out3 = tmp_path / "c.jsonl"
        dump_activations(other, manifest, out3)
        assert out1.read_bytes() != out3.read_bytes()

    def test_cli_dump(self, manifest, tmp_path):
        out = tmp_path / "acts.jsonl"
        run = subprocess.run(
            adapter_cmd(
                "dump", "--model", "demo", "--layer", "relu2",
                "--manifest", str(manifest), "--out", str(out),
            ),
            capture_output=True,
            text=True,
            timeout=120,
        )
        assert run.returncode == 0, run.stderr
        assert len(read_jsonl(out)) == 5

    def test_dump_feeds_the_metrics_engine(self, manifest, tmp_path):
        pytest.importorskip("depmetrics")
        from depmetrics.formats import load_activations
        from depmetrics.neuron import ActivationMatrix, k_activation

        out = tmp_path / "acts.jsonl"
        dump_activations(AdapterConfig(model="demo", layer="relu2"), manifest, out)
        records = load_activations(out)
        acts = ActivationMatrix.from_records(records, layer="relu2")
        report = k_activation(acts, 2)
        assert report.c == 32
        assert 0 <= report.metric <= 1
