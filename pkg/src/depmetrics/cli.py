"""Command-line front end: one subcommand per metric plus an `all` runner.

Exit codes: 0 success, 1 validation or usage error, 2 oracle failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

try:
    import tomllib
except ImportError:
    import tomli as tomllib

from . import confusion as confusion_mod
from . import formats, occlusion, perturb, raster, report, scenario, svg
from . import neuron as neuron_mod
from .errors import DepmetricsError, OracleDownError, OracleError, ValidationError
from .model import IDENTITY_TRANSFORM, DatasetManifest, PredictionRecord
from .oracle import OracleRequest, OracleSession

_STDOUT = "-"


def _fraction_dict(numerator: int, denominator: int) -> dict:
    return {
        "numerator": numerator,
        "denominator": denominator,
        "rational": f"{numerator}/{denominator}",
        "value": numerator / denominator,
    }


def parse_sweep(text: str) -> list[float]:
    """\"start:end:step\" inclusive of both ends (within float tolerance)."""
    try:
        start, end, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise ValidationError(f"sweep must be start:end:step, got '{text}'") from None
    if step <= 0 or end < start:
        raise ValidationError(f"sweep needs end >= start and step > 0, got '{text}'")
    n = int((end - start) / step + 1e-9) + 1
    return [round(start + i * step, 12) for i in range(n)]


def load_transformers(path) -> list[perturb.Transformer]:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValidationError("file not found", path=path) from None
    except json.JSONDecodeError as e:
        raise ValidationError(f"invalid JSON ({e.msg})", path=path) from None
    entries = obj.get("transforms") if isinstance(obj, dict) else obj
    if not isinstance(entries, list) or not entries:
        raise ValidationError("transforms file must list {name, kind, params?}", path=path)
    out = []
    try:
        for entry in entries:
            out.append(
                perturb.Transformer(
                    name=str(entry["name"]),
                    kind=str(entry["kind"]),
                    params=entry.get("params", {}),
                )
            )
    except (KeyError, TypeError):
        raise ValidationError("each transform needs name and kind", path=path) from None
    except ValidationError as e:
        raise e.at(path) from None
    return out


# ---------------------------------------------------------------------------
# Metric runners shared by subcommands and `all`
# ---------------------------------------------------------------------------

def run_scene(space_path, manifest_path, suggest: int = 0) -> dict:
    space = formats.load_scenario_space(space_path)
    manifest = formats.load_manifest(manifest_path, space)
    cov = scenario.scene_coverage(manifest, space)
    details: dict[str, Any] = {
        **_fraction_dict(cov.numerator, cov.denominator),
        "skipped_unlabeled": cov.skipped,
        "note": "denominator counts every cell; impossible condition combinations are not excluded",
        "tables": [
            {
                "pair": list(t.pair),
                "conditions": list(t.conditions),
                "capacity": t.capacity,
                "occupied": sorted(list(v) for v in t.occupied),
            }
            for t in cov.tables
        ],
        "unoccupied": [
            {"conditions": list(u.conditions), "values": list(u.values)}
            for u in cov.unoccupied
        ],
    }
    if suggest:
        running = cov.numerator
        suggestions = []
        for s in scenario.suggest_scenarios(cov, space, suggest):
            running += s.gain
            suggestions.append(
                {
                    "scenario": s.scenario.as_dict(),
                    "gain": s.gain,
                    "metric_after": f"{running}/{cov.denominator}",
                }
            )
        details["suggestions"] = suggestions
    record = report.MetricRecord(
        name="scene-coverage",
        value=cov.value,
        rational=cov.rational,
        parameters={"suggest": suggest},
        provenance=report.provenance(space=space_path, manifest=manifest_path),
    )
    return {"details": details, "metrics": [record], "_coverage": cov, "_space": space}


def run_neuron(activations_path, layer, k, threshold=0.0, allow_large=False) -> dict:
    records = formats.load_activations(activations_path)
    acts = neuron_mod.ActivationMatrix.from_records(records, layer=layer, threshold=threshold)
    rep = neuron_mod.k_activation(acts, k, allow_large=allow_large)
    details = {
        **_fraction_dict(rep.occupied, rep.denominator),
        "layer": rep.layer,
        "k": rep.k,
        "c": rep.c,
        "threshold": threshold,
        "inputs": len(acts),
    }
    record = report.MetricRecord(
        name="neuron-k-activation",
        value=rep.value,
        rational=rep.rational,
        parameters={"layer": rep.layer, "k": k, "threshold": threshold},
        provenance=report.provenance(activations=activations_path),
    )
    return {"details": details, "metrics": [record]}


def run_pattern(
    activations_path,
    layer,
    gamma,
    manifest_path=None,
    space_path=None,
    threshold=0.0,
    allow_mixed=False,
) -> dict:
    records = formats.load_activations(activations_path)
    acts = neuron_mod.ActivationMatrix.from_records(records, layer=layer, threshold=threshold)
    space = formats.load_scenario_space(space_path) if space_path else None
    manifest = formats.load_manifest(manifest_path, space) if manifest_path else None
    rep = neuron_mod.pattern_metric(
        acts, gamma, manifest=manifest, space=space, allow_mixed=allow_mixed
    )
    details = {
        **_fraction_dict(rep.deviating, rep.total),
        "layer": rep.layer,
        "gamma": rep.gamma,
        "c": rep.c,
        "group_sizes": list(rep.group_sizes),
        "majority_index": rep.majority_index,
        "degenerate": rep.degenerate,
        "scenario": None if rep.scenario is None else rep.scenario.as_dict(),
    }
    record = report.MetricRecord(
        name="neuron-activation-pattern",
        value=rep.value,
        rational=rep.rational,
        parameters={"layer": rep.layer, "gamma": gamma, "threshold": threshold},
        provenance=report.provenance(
            activations=activations_path, manifest=manifest_path, space=space_path
        ),
    )
    return {"details": details, "metrics": [record]}


def _score_with_oracle(
    manifest: DatasetManifest,
    transformers: list[perturb.Transformer],
    epsilon: float,
    seed: int,
    session: OracleSession,
    parallelism: int,
    tmp_dir: Path,
) -> tuple[list[PredictionRecord], list[PredictionRecord]]:
    """Query identity plus every transformer for each image-bearing point.

    Returns (originals, perturbed); a transformer literally named
    "identity" is scored from the baseline answer and competes in the min.
    """
    originals: list[PredictionRecord] = []
    perturbed: list[PredictionRecord] = []
    for point in manifest:
        if point.image_path is None:
            continue
        image = raster.load_image(manifest.image_file(point))
        requests = [OracleRequest(f"{point.id}:identity", str(manifest.image_file(point)))]
        tags = [(IDENTITY_TRANSFORM, 0.0)]
        for t in transformers:
            if t.name == IDENTITY_TRANSFORM:
                continue  # scored by the baseline request
            if t.kind == "external":
                raise ValidationError(
                    f"transformer '{t.name}' is external; score it ahead of time and "
                    "pass --predictions"
                )
            out = perturb.apply_transform(image, t, epsilon, seed=seed)
            path = tmp_dir / f"{point.id}__{t.name}.png"
            raster.save_image(out, path)
            requests.append(OracleRequest(f"{point.id}:{t.name}", str(path)))
            tags.append((t.name, epsilon))
        responses = session.query_batch(requests, parallelism=parallelism)
        by_id = {r.request_id: r for r in responses}
        for request, (tag, eps) in zip(requests, tags):
            response = by_id[request.request_id]
            if not response.ok:
                raise OracleError(
                    f"oracle failed on request '{request.request_id}': {response.error}"
                )
            if response.outputs is None:
                raise ValidationError(
                    "adversarial scoring needs classification outputs, got detections"
                )
            record = PredictionRecord(
                input_id=point.id, transform=tag, epsilon=eps, outputs=response.outputs
            )
            if tag == IDENTITY_TRANSFORM:
                originals.append(record)
            else:
                perturbed.append(record)
        if any(t.name == IDENTITY_TRANSFORM for t in transformers):
            perturbed.append(originals[-1])
    return originals, perturbed


def run_adv(
    manifest_path,
    target=None,
    predictions_path=None,
    oracle_cmd=None,
    transforms_path=None,
    epsilon=0.0,
    seed=0,
    save_predictions=None,
    parallelism=4,
    request_timeout=30.0,
) -> dict:
    if (predictions_path is None) == (oracle_cmd is None):
        raise ValidationError("pass exactly one of --predictions or --oracle")
    manifest = formats.load_manifest(manifest_path)
    prov: dict[str, Any] = {"manifest": manifest_path}
    if predictions_path is not None:
        records = formats.load_predictions(predictions_path)
        prov["predictions"] = predictions_path
        originals = _dedupe([r for r in records if r.is_identity])
        perturbed = [r for r in records if not r.is_identity]
        if not perturbed:
            # A file with only identity rows means the transformer list was
            # just the identity: every delta is 0 by construction.
            perturbed = originals
    else:
        if transforms_path is None:
            raise ValidationError("--oracle mode needs --transforms")
        transformers = load_transformers(transforms_path)
        prov["transforms"] = transforms_path
        import tempfile

        with tempfile.TemporaryDirectory(prefix="depmetrics-adv-") as tmp:
            with OracleSession(oracle_cmd, request_timeout=request_timeout) as session:
                originals, perturbed = _score_with_oracle(
                    manifest, transformers, epsilon, seed, session, parallelism, Path(tmp)
                )
        if save_predictions:
            formats.write_predictions(_dedupe(originals + perturbed), save_predictions)

    rep = perturb.adv_loss(originals, perturbed, target=target)
    details = {
        "epsilon": rep.epsilon,
        "target": rep.target,
        "value": rep.metric,
        "inputs": len(rep.per_input),
        "per_input": {
            input_id: {"worst_transform": loss.worst_transform, "delta": loss.delta}
            for input_id, loss in sorted(rep.per_input.items())
        },
    }
    record = report.MetricRecord(
        name="adversarial-confidence-loss",
        value=rep.metric,
        parameters={"epsilon": rep.epsilon, "target": target, "seed": seed},
        provenance=report.provenance(**prov),
    )
    return {"details": details, "metrics": [record]}


def _dedupe(records: list[PredictionRecord]) -> list[PredictionRecord]:
    seen = set()
    out = []
    for r in records:
        key = (r.input_id, r.transform, r.epsilon)
        if key in seen:
            continue
        seen.add(key)
        out.append(r)
    return out


def _occlusion_targets(manifest: DatasetManifest):
    """(key, point, Target, mask_path) per analyzable object; None mask = skip metrics."""
    for point in manifest:
        if point.image_path is None or point.ground_truth is None:
            continue
        gt = point.ground_truth
        if gt.class_label is not None:
            yield point.id, point, occlusion.Target(class_label=gt.class_label), gt.mask_path
        else:
            for i, obj in enumerate(gt.objects):
                yield (
                    f"{point.id}#obj{i}",
                    point,
                    occlusion.Target(class_label=obj.class_label, box=obj.box,
                                     mask_path=obj.mask_path),
                    obj.mask_path,
                )


def run_occlusion(
    manifest_path,
    oracle_cmd,
    size,
    stride,
    rho,
    fill=0.5,
    jaccard_min=0.5,
    min_overlap=0.0,
    sweep=None,
    parallelism=4,
    request_timeout=30.0,
    partial_path=None,
    svg_dir=None,
) -> dict:
    if not oracle_cmd:
        raise ValidationError("occlusion heatmaps need an oracle command")
    manifest = formats.load_manifest(manifest_path)
    spec = occlusion.OccluderSpec(size=size, stride=stride, fill=fill)
    partials: dict[str, occlusion.Heatmap] = {}
    if partial_path and Path(partial_path).exists():
        saved = json.loads(Path(partial_path).read_text(encoding="utf-8"))
        partials = {
            key: occlusion.Heatmap.from_dict(h)
            for key, h in saved.get("heatmaps", {}).items()
        }

    targets_out: dict[str, Any] = {}
    heatmaps: dict[str, occlusion.Heatmap] = {}
    interpret_values: list[Fraction] = []
    occsen_values: list[Fraction] = []
    skipped_no_mask: list[str] = []

    with OracleSession(oracle_cmd, request_timeout=request_timeout) as session:
        for key, point, target, mask_path in _occlusion_targets(manifest):
            image = raster.load_image(manifest.image_file(point))
            try:
                heatmap = occlusion.compute_heatmap(
                    image,
                    spec,
                    session,
                    target,
                    jaccard_min=jaccard_min,
                    parallelism=parallelism,
                    input_id=key.replace("#", "_"),
                    partial=partials.get(key),
                )
            except OracleDownError as e:
                if e.partial is not None:
                    heatmaps[key] = e.partial
                _persist_partial(partial_path, heatmaps)
                raise
            heatmaps[key] = heatmap

            entry: dict[str, Any] = {
                "input_id": point.id,
                "class_label": target.class_label,
                "mode": target.mode,
                "baseline_p": heatmap.baseline_p,
                "grid": [heatmap.rows, heatmap.cols],
                "heatmap": heatmap.to_dict(),
            }
            if mask_path is None:
                skipped_no_mask.append(key)
                entry["note"] = "no segmentation mask; heatmap only"
            else:
                mask = raster.load_mask(manifest.image_file(point).parent / mask_path)
                sets = occlusion.pixel_sets(heatmap, mask, rho, min_overlap)
                entry["hot"] = len(sets.hot)
                entry["occluding"] = len(sets.occluding)
                entry["overlap"] = len(sets.overlap)
                if sets.hot:
                    entry["interpret"] = _fraction_dict(len(sets.overlap), len(sets.hot))
                    interpret_values.append(Fraction(len(sets.overlap), len(sets.hot)))
                else:
                    entry["interpret"] = None
                if sets.occluding:
                    entry["occsen"] = _fraction_dict(len(sets.overlap), len(sets.occluding))
                    occsen_values.append(Fraction(len(sets.overlap), len(sets.occluding)))
                else:
                    entry["occsen"] = None
                if sweep:
                    points = occlusion.rho_sweep(heatmap, mask, sweep, min_overlap)
                    entry["sweep"] = [
                        {
                            "rho": p.rho,
                            "interpret": None if p.interpret is None else float(p.interpret),
                            "occsen": float(p.occsen),
                        }
                        for p in points
                    ]
                    if svg_dir:
                        _write_svg(svg_dir, f"{key}_curve", svg.render_rho_curve_svg(points))
                if svg_dir:
                    _write_svg(svg_dir, key, svg.render_heatmap_svg(heatmap, sets))
            targets_out[key] = entry

    if partial_path and Path(partial_path).exists():
        Path(partial_path).unlink()

    def mean(values: list[Fraction]) -> float | None:
        return float(sum(values) / len(values)) if values else None

    single = len(interpret_values) == 1
    details = {
        "occluder": {"size": size, "stride": stride, "fill": fill},
        "rho": rho,
        "jaccard_min": jaccard_min,
        "min_overlap": min_overlap,
        "targets": targets_out,
        "skipped_no_mask": skipped_no_mask,
        "aggregate": {
            "method": "mean",
            "interpret": mean(interpret_values),
            "occsen": mean(occsen_values),
        },
    }
    params = {"size": size, "stride": stride, "rho": rho, "jaccard_min": jaccard_min}
    prov = report.provenance(manifest=manifest_path)
    metrics = [
        report.MetricRecord(
            name="interpretation-precision",
            value=mean(interpret_values),
            rational=(
                f"{interpret_values[0].numerator}/{interpret_values[0].denominator}"
                if single
                else None
            ),
            parameters=params,
            provenance=prov,
        ),
        report.MetricRecord(
            name="occlusion-sensitivity-covering",
            value=mean(occsen_values),
            rational=(
                f"{occsen_values[0].numerator}/{occsen_values[0].denominator}"
                if len(occsen_values) == 1
                else None
            ),
            parameters=params,
            provenance=prov,
        ),
    ]
    return {"details": details, "metrics": metrics}


def _persist_partial(partial_path, heatmaps: dict[str, occlusion.Heatmap]) -> None:
    if not partial_path:
        return
    payload = {"heatmaps": {key: h.to_dict() for key, h in heatmaps.items()}}
    Path(partial_path).write_text(report.canonical_json(payload), encoding="utf-8")


def _write_svg(svg_dir, name, document: str) -> None:
    out = Path(svg_dir)
    out.mkdir(parents=True, exist_ok=True)
    safe = name.replace("#", "_").replace("/", "_")
    (out / f"{safe}.svg").write_text(document, encoding="utf-8")


def run_confusion(manifest_path, predictions_path, weights_path=None, threshold=0.5) -> dict:
    manifest = formats.load_manifest(manifest_path)
    predictions = formats.load_predictions(predictions_path)
    weights = (
        confusion_mod.load_weight_matrix(weights_path)
        if weights_path
        else confusion_mod.DEFAULT_WEIGHTS
    )
    rep = confusion_mod.weighted_confusion(manifest, predictions, weights, threshold)
    details = {
        "classes": list(rep.classes),
        "counts": [list(row) for row in rep.counts],
        "weighted_score": rep.weighted_score,
        "plain_accuracy": {
            "rational": rep.accuracy_rational,
            "value": float(rep.plain_accuracy),
        },
        "worst_cells": [
            {
                "true": cell.true_label,
                "predicted": cell.predicted_label,
                "count": cell.count,
                "weight": cell.weight,
                "mass": cell.mass,
            }
            for cell in rep.worst_cells
        ],
        "evaluated": rep.evaluated,
        "skipped": rep.skipped,
    }
    record = report.MetricRecord(
        name="weighted-confusion",
        value=rep.weighted_score,
        parameters={"threshold": threshold, "weights": "default" if not weights_path else "file"},
        provenance=report.provenance(
            manifest=manifest_path, predictions=predictions_path, weights=weights_path
        ),
    )
    return {"details": details, "metrics": [record]}


def run_degrade(
    manifest_path, predictions_path, space_path, base="accuracy",
    weights_path=None, threshold=0.5,
) -> dict:
    space = formats.load_scenario_space(space_path)
    manifest = formats.load_manifest(manifest_path, space)
    predictions = formats.load_predictions(predictions_path)
    weights = (
        confusion_mod.load_weight_matrix(weights_path)
        if weights_path
        else confusion_mod.DEFAULT_WEIGHTS
    )
    rep = confusion_mod.degradation(
        manifest, predictions, space, base=base, weights=weights, threshold=threshold
    )
    details = {
        "base": rep.base,
        "per_scenario": [
            {"scenario": s.scenario.as_dict(), "count": s.count, "value": s.value}
            for s in rep.per_scenario
        ],
        "global": rep.overall,
        "coverage_used": {
            "rational": rep.coverage_rational,
            "value": float(rep.coverage_used),
        },
        "discounted": rep.discounted,
        "evaluated": rep.evaluated,
        "skipped": rep.skipped,
        "note": "interpretation: per-scenario breakdown with a multiplicative coverage discount",
    }
    record = report.MetricRecord(
        name="scenario-degradation",
        value=rep.discounted,
        parameters={"base": base, "threshold": threshold},
        provenance=report.provenance(
            manifest=manifest_path, predictions=predictions_path,
            space=space_path, weights=weights_path,
        ),
    )
    return {"details": details, "metrics": [record]}


# ---------------------------------------------------------------------------
# Output plumbing
# ---------------------------------------------------------------------------

def _emit(payload: dict, args) -> None:
    payload = dict(payload)
    records = payload.pop("metrics", [])
    payload.pop("_coverage", None)
    payload.pop("_space", None)
    out: dict[str, Any] = {
        "command": payload.pop("command"),
        "metrics": [r.to_dict() for r in records],
    }
    out.update(payload)
    if getattr(args, "out", None) and args.out != _STDOUT:
        report.write_report(out, args.out)
    else:
        sys.stdout.write(report.canonical_json(out))
    if getattr(args, "md", None):
        Path(args.md).parent.mkdir(parents=True, exist_ok=True)
        Path(args.md).write_text(report.markdown_summary(out), encoding="utf-8")


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_scene(args) -> int:
    result = run_scene(args.space, args.manifest, suggest=args.suggest)
    if args.svg:
        _write_svg(args.svg, "coverage",
                   svg.render_coverage_svg(result["_coverage"], result["_space"]))
    _emit({"command": "scene", "details": result["details"], "metrics": result["metrics"]}, args)
    return 0


def _cmd_neuron(args) -> int:
    result = run_neuron(
        args.activations, args.layer, args.k,
        threshold=args.threshold, allow_large=args.allow_large_k,
    )
    _emit({"command": "neuron", **result}, args)
    return 0


def _cmd_pattern(args) -> int:
    result = run_pattern(
        args.activations, args.layer, args.gamma,
        manifest_path=args.manifest, space_path=args.space,
        threshold=args.threshold, allow_mixed=args.allow_mixed,
    )
    _emit({"command": "pattern", **result}, args)
    return 0


def _cmd_adv(args) -> int:
    result = run_adv(
        args.manifest,
        target=args.target,
        predictions_path=args.predictions,
        oracle_cmd=args.oracle,
        transforms_path=args.transforms,
        epsilon=args.epsilon,
        seed=args.seed,
        save_predictions=args.save_predictions,
        parallelism=args.parallelism,
        request_timeout=args.request_timeout,
    )
    _emit({"command": "adv", **result}, args)
    return 0


def _cmd_occlusion(args) -> int:
    sweep = parse_sweep(args.rho_sweep) if args.rho_sweep else None
    partial_path = f"{args.out}.partial.json" if args.out and args.out != _STDOUT else None
    result = run_occlusion(
        args.manifest,
        args.oracle,
        size=args.size,
        stride=args.stride,
        rho=args.rho,
        fill=args.fill,
        jaccard_min=args.jaccard_min,
        min_overlap=args.min_overlap,
        sweep=sweep,
        parallelism=args.parallelism,
        request_timeout=args.request_timeout,
        partial_path=partial_path,
        svg_dir=args.svg,
    )
    _emit({"command": "occlusion", **result}, args)
    return 0


def _cmd_confusion(args) -> int:
    result = run_confusion(
        args.manifest, args.predictions, weights_path=args.weights, threshold=args.threshold
    )
    _emit({"command": "confusion", **result}, args)
    return 0


def _cmd_degrade(args) -> int:
    result = run_degrade(
        args.manifest, args.predictions, args.space,
        base=args.base, weights_path=args.weights, threshold=args.threshold,
    )
    _emit({"command": "degrade", **result}, args)
    return 0


def _cmd_all(args) -> int:
    config_path = Path(args.config)
    try:
        config = tomllib.loads(config_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValidationError("file not found", path=config_path) from None
    except tomllib.TOMLDecodeError as e:
        raise ValidationError(f"invalid TOML ({e})", path=config_path) from None
    base = config_path.parent

    def path_of(value):
        return None if value is None else str(base / value)

    inputs = config.get("inputs", {})
    oracle_cfg = config.get("oracle", {})
    oracle_cmd = oracle_cfg.get("command")
    parallelism = int(oracle_cfg.get("parallelism", 4))
    request_timeout = float(oracle_cfg.get("request_timeout", 30.0))
    space = path_of(inputs.get("space"))
    manifest = path_of(inputs.get("manifest"))
    activations = path_of(inputs.get("activations"))
    predictions = path_of(inputs.get("predictions"))
    weights = path_of(inputs.get("weights"))

    out_cfg = config.get("output", {})
    out = args.out or path_of(out_cfg.get("out"))
    md = args.md or path_of(out_cfg.get("md"))
    svg_dir = args.svg or path_of(out_cfg.get("svg"))

    metrics = []
    details: dict[str, Any] = {}
    if "scene" in config:
        section = config["scene"]
        result = run_scene(space, manifest, suggest=int(section.get("suggest", 0)))
        details["scene"] = result["details"]
        metrics += result["metrics"]
        if svg_dir:
            _write_svg(svg_dir, "coverage",
                       svg.render_coverage_svg(result["_coverage"], result["_space"]))
    if "neuron" in config:
        section = config["neuron"]
        result = run_neuron(
            activations, section.get("layer"), int(section.get("k", 1)),
            threshold=float(section.get("threshold", 0.0)),
            allow_large=bool(section.get("allow_large_k", False)),
        )
        details["neuron"] = result["details"]
        metrics += result["metrics"]
    if "pattern" in config:
        section = config["pattern"]
        result = run_pattern(
            activations, section.get("layer"), int(section.get("gamma", 1)),
            manifest_path=manifest if section.get("check_scenario", False) else None,
            space_path=space if section.get("check_scenario", False) else None,
            threshold=float(section.get("threshold", 0.0)),
            allow_mixed=bool(section.get("allow_mixed", False)),
        )
        details["pattern"] = result["details"]
        metrics += result["metrics"]
    if "adv" in config:
        section = config["adv"]
        adv_predictions = path_of(section.get("predictions")) or (
            predictions if oracle_cmd is None else None
        )
        result = run_adv(
            manifest,
            target=section.get("target"),
            predictions_path=adv_predictions,
            oracle_cmd=None if adv_predictions else oracle_cmd,
            transforms_path=path_of(section.get("transforms")),
            epsilon=float(section.get("epsilon", 0.0)),
            seed=int(section.get("seed", 0)),
            save_predictions=path_of(section.get("save_predictions")),
            parallelism=parallelism,
            request_timeout=request_timeout,
        )
        details["adv"] = result["details"]
        metrics += result["metrics"]
    if "occlusion" in config:
        section = config["occlusion"]
        sweep = parse_sweep(section["rho_sweep"]) if "rho_sweep" in section else None
        result = run_occlusion(
            manifest,
            oracle_cmd,
            size=int(section["size"]),
            stride=int(section["stride"]),
            rho=float(section.get("rho", 0.5)),
            fill=float(section.get("fill", 0.5)),
            jaccard_min=float(section.get("jaccard_min", 0.5)),
            min_overlap=float(section.get("min_overlap", 0.0)),
            sweep=sweep,
            parallelism=parallelism,
            request_timeout=request_timeout,
            partial_path=f"{out}.partial.json" if out else None,
            svg_dir=svg_dir,
        )
        details["occlusion"] = result["details"]
        metrics += result["metrics"]
    if "confusion" in config:
        section = config["confusion"]
        result = run_confusion(
            manifest, predictions, weights_path=weights,
            threshold=float(section.get("threshold", 0.5)),
        )
        details["confusion"] = result["details"]
        metrics += result["metrics"]
    if "degrade" in config:
        section = config["degrade"]
        result = run_degrade(
            manifest, predictions, space,
            base=section.get("base", "accuracy"),
            weights_path=weights,
            threshold=float(section.get("threshold", 0.5)),
        )
        details["degrade"] = result["details"]
        metrics += result["metrics"]

    args.out = out
    args.md = md
    _emit({"command": "all", "details": details, "metrics": metrics}, args)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage failures exit 1, per the CLI contract."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_output_flags(p: argparse.ArgumentParser, svg: bool = False):
    p.add_argument("--out", help="JSON report path (default: stdout)")
    p.add_argument("--md", help="markdown summary path")
    if svg:
        p.add_argument("--svg", help="directory for SVG renderings")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="depmetrics", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("scene", help="scenario pair-coverage")
    p.add_argument("--space", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--suggest", type=int, default=0, help="suggest up to N new scenarios")
    _add_output_flags(p, svg=True)
    p.set_defaults(func=_cmd_scene)

    p = sub.add_parser("neuron", help="neuron k-activation coverage")
    p.add_argument("--activations", required=True)
    p.add_argument("--layer")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--allow-large-k", action="store_true")
    _add_output_flags(p)
    p.set_defaults(func=_cmd_neuron)

    p = sub.add_parser("pattern", help="activation-pattern deviation")
    p.add_argument("--activations", required=True)
    p.add_argument("--layer")
    p.add_argument("--gamma", type=int, required=True)
    p.add_argument("--manifest")
    p.add_argument("--space")
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--allow-mixed", action="store_true")
    _add_output_flags(p)
    p.set_defaults(func=_cmd_pattern)

    p = sub.add_parser("adv", help="adversarial confidence loss")
    p.add_argument("--manifest", required=True)
    p.add_argument("--oracle", help="oracle command line")
    p.add_argument("--transforms", help="transformers JSON file")
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target", help="class whose probability is compared")
    p.add_argument("--predictions", help="pre-scored records; skips the oracle")
    p.add_argument("--save-predictions", help="persist oracle scores as JSONL")
    p.add_argument("--parallelism", type=int, default=4)
    p.add_argument("--request-timeout", type=float, default=30.0)
    _add_output_flags(p)
    p.set_defaults(func=_cmd_adv)

    p = sub.add_parser("occlusion", help="occlusion sensitivity heatmaps")
    p.add_argument("--manifest", required=True)
    p.add_argument("--oracle", required=True)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--stride", type=int, required=True)
    p.add_argument("--fill", type=float, default=0.5)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--rho-sweep", help="start:end:step")
    p.add_argument("--jaccard-min", type=float, default=0.5)
    p.add_argument("--min-overlap", type=float, default=0.0)
    p.add_argument("--parallelism", type=int, default=4)
    p.add_argument("--request-timeout", type=float, default=30.0)
    _add_output_flags(p, svg=True)
    p.set_defaults(func=_cmd_occlusion)

    p = sub.add_parser("confusion", help="weighted confusion scoring")
    p.add_argument("--manifest", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--weights")
    p.add_argument("--threshold", type=float, default=0.5)
    _add_output_flags(p)
    p.set_defaults(func=_cmd_confusion)

    p = sub.add_parser("degrade", help="scenario-based performance degradation")
    p.add_argument("--manifest", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--space", required=True)
    p.add_argument("--base", choices=("accuracy", "weighted"), default="accuracy")
    p.add_argument("--weights")
    p.add_argument("--threshold", type=float, default=0.5)
    _add_output_flags(p)
    p.set_defaults(func=_cmd_degrade)

    p = sub.add_parser("all", help="run every configured metric")
    p.add_argument("--config", required=True, help="TOML run configuration")
    _add_output_flags(p, svg=True)
    p.set_defaults(func=_cmd_all)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except OracleError as e:
        print(f"depmetrics: oracle failure: {e}", file=sys.stderr)
        return 2
    except DepmetricsError as e:
        print(f"depmetrics: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
