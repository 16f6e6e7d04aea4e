"""End-to-end command-line flows over a small generated project."""

from __future__ import annotations

import json
import shlex
import sys
from pathlib import Path

import pytest

from depmetrics.cli import main, parse_sweep

from conftest import STUB_ORACLE, build_project, write_run_config


@pytest.fixture
def project(tmp_path):
    return build_project(tmp_path)


def oracle_cmd(mode: str, *extra: str) -> str:
    return shlex.join([sys.executable, str(STUB_ORACLE), mode, *extra])


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


class TestScene:
    def test_worked_fixture_report(self, project, capsys):
        code = main(
            [
                "scene",
                "--space", str(project / "space.json"),
                "--manifest", str(project / "data.jsonl"),
                "--suggest", "1",
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert '"6/21"' in out
        payload = json.loads(out)
        assert payload["details"]["value"] == pytest.approx(0.2857142857142857)
        assert payload["details"]["suggestions"][0]["gain"] == 3
        assert payload["details"]["suggestions"][0]["metric_after"] == "9/21"
        assert payload["metrics"][0]["ricc"] == ["completeness", "correctness"]

    def test_svg_and_md_outputs(self, project):
        out = project / "scene.json"
        code = main(
            [
                "scene",
                "--space", str(project / "space.json"),
                "--manifest", str(project / "data.jsonl"),
                "--out", str(out),
                "--md", str(project / "scene.md"),
                "--svg", str(project / "svg"),
            ]
        )
        assert code == 0
        assert out.exists()
        assert (project / "scene.json.meta.json").exists()
        assert "scene-coverage" in (project / "scene.md").read_text(encoding="utf-8")
        assert (project / "svg" / "coverage.svg").exists()

    def test_missing_manifest_exits_one(self, project, capsys):
        code = main(
            [
                "scene",
                "--space", str(project / "space.json"),
                "--manifest", str(project / "nope.jsonl"),
            ]
        )
        assert code == 1
        assert "nope.jsonl" in capsys.readouterr().err

    def test_unknown_flag_exits_one(self, project, capsys):
        code = main(["scene", "--nonsense"])
        assert code == 1


class TestNeuronPattern:
    def test_neuron_report(self, project, capsys):
        code = main(
            ["neuron", "--activations", str(project / "acts.jsonl"), "--k", "2"]
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["details"]["denominator"] == 24  # C(4,2) * 4
        assert payload["details"]["c"] == 4

    def test_pattern_mixed_scenarios_fail_then_flag(self, project, capsys):
        args = [
            "pattern",
            "--activations", str(project / "acts.jsonl"),
            "--gamma", "3",
            "--manifest", str(project / "data.jsonl"),
            "--space", str(project / "space.json"),
        ]
        assert main(args) == 1
        assert "scenario" in capsys.readouterr().err
        assert main(args + ["--allow-mixed"]) == 0


class TestAdv:
    def test_prescored_replay(self, project, capsys):
        code = main(
            [
                "adv",
                "--manifest", str(project / "data.jsonl"),
                "--predictions", str(project / "preds.jsonl"),
                "--target", "car",
            ]
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        per_input = payload["details"]["per_input"]
        assert per_input["p1"]["delta"] == pytest.approx(-0.22)
        assert per_input["p1"]["worst_transform"] == "fgsm-external"
        assert payload["details"]["value"] == pytest.approx((-0.22 + -0.01) / 2)

    def test_conflicting_inputs_rejected(self, project, capsys):
        code = main(
            [
                "adv",
                "--manifest", str(project / "data.jsonl"),
                "--predictions", str(project / "preds.jsonl"),
                "--oracle", oracle_cmd("constant:0.7"),
                "--target", "car",
            ]
        )
        assert code == 1
        assert "exactly one" in capsys.readouterr().err

    def test_oracle_mode_saves_predictions(self, project, capsys):
        saved = project / "scored.jsonl"
        code = main(
            [
                "adv",
                "--manifest", str(project / "data.jsonl"),
                "--oracle", oracle_cmd("constant:0.7"),
                "--transforms", str(project / "transforms.json"),
                "--epsilon", "0.1",
                "--target", "car",
                "--save-predictions", str(saved),
            ]
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["details"]["value"] == pytest.approx(0.0)  # constant oracle
        lines = saved.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 6  # 2 inputs x (identity + 2 transforms)

    def test_oracle_failure_exits_two(self, project, capsys):
        code = main(
            [
                "adv",
                "--manifest", str(project / "data.jsonl"),
                "--oracle", oracle_cmd("constant:0.7", "--version", "9"),
                "--transforms", str(project / "transforms.json"),
                "--epsilon", "0.1",
                "--target", "car",
            ]
        )
        assert code == 2


class TestOcclusion:
    def test_geometric_single_hot_cell(self, project, capsys):
        code = main(
            [
                "occlusion",
                "--manifest", str(project / "data.jsonl"),
                "--oracle", oracle_cmd("geometric:20,20,40,40"),
                "--size", "20",
                "--stride", "20",
                "--rho", "0.5",
                "--rho-sweep", "0:1:0.5",
                "--svg", str(project / "svg"),
            ]
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        target = payload["details"]["targets"]["p1"]
        assert target["grid"] == [3, 3]
        assert target["hot"] == 1
        assert target["occluding"] == 1
        assert target["interpret"]["rational"] == "1/1"
        assert target["occsen"]["rational"] == "1/1"
        assert [p["occsen"] for p in target["sweep"]] == [0.0, 1.0, 1.0]
        assert (project / "svg" / "p1.svg").exists()
        assert (project / "svg" / "p1_curve.svg").exists()
        assert payload["details"]["aggregate"]["interpret"] == pytest.approx(1.0)


class TestConfusionDegrade:
    def test_confusion_with_weight_file(self, project, capsys):
        code = main(
            [
                "confusion",
                "--manifest", str(project / "data.jsonl"),
                "--predictions", str(project / "preds.jsonl"),
                "--weights", str(project / "weights.json"),
            ]
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["details"]["weighted_score"] == 0.0
        assert payload["details"]["plain_accuracy"]["rational"] == "2/2"

    def test_degrade_discounts_by_coverage(self, project, capsys):
        code = main(
            [
                "degrade",
                "--manifest", str(project / "data.jsonl"),
                "--predictions", str(project / "preds.jsonl"),
                "--space", str(project / "space.json"),
                "--base", "accuracy",
            ]
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["details"]["coverage_used"]["rational"] == "6/21"
        assert payload["details"]["discounted"] == pytest.approx(6 / 21)


class TestAll:
    def test_combined_run_is_byte_stable(self, project):
        config = write_run_config(project)
        assert main(["all", "--config", str(config)]) == 0
        report_path = project / "report.json"
        first = report_path.read_bytes()
        payload = read_json(report_path)
        names = [m["name"] for m in payload["metrics"]]
        assert names == [
            "scene-coverage",
            "neuron-k-activation",
            "neuron-activation-pattern",
            "adversarial-confidence-loss",
            "interpretation-precision",
            "occlusion-sensitivity-covering",
            "weighted-confusion",
            "scenario-degradation",
        ]
        assert payload["details"]["scene"]["rational"] == "6/21"
        for record in payload["metrics"]:
            assert record["ricc"], record["name"]

        assert main(["all", "--config", str(config)]) == 0
        assert report_path.read_bytes() == first
        assert (project / "report.md").exists()

    def test_missing_config_exits_one(self, project, capsys):
        assert main(["all", "--config", str(project / "absent.toml")]) == 1


def test_parse_sweep_inclusive():
    assert parse_sweep("0:1:0.05") == pytest.approx([i * 0.05 for i in range(21)])
    assert len(parse_sweep("0:1:0.05")) == 21
    assert parse_sweep("0.5:0.5:0.1") == [0.5]
