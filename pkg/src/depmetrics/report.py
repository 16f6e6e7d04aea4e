"""Report assembly: metric records with dependability tags, canonical JSON.

Reports are byte-stable: keys are sorted, rationals are rendered
unreduced next to their float value, and timestamps live only in a
sidecar file excluded from digests.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping

from .errors import ValidationError

RICC = ("robustness", "interpretability", "completeness", "correctness")

# Dependability attributes each metric speaks to.
METRIC_RICC: dict[str, tuple[str, ...]] = {
    "scene-coverage": ("completeness", "correctness"),
    "neuron-k-activation": ("completeness", "correctness"),
    "neuron-activation-pattern": ("robustness", "interpretability", "completeness"),
    "adversarial-confidence-loss": ("robustness", "correctness"),
    "scenario-degradation": ("completeness", "correctness"),
    "interpretation-precision": ("interpretability", "correctness"),
    "occlusion-sensitivity-covering": ("robustness", "interpretability"),
    "weighted-confusion": ("correctness",),
}


def ricc_tags(metric_name: str) -> tuple[str, ...]:
    try:
        return METRIC_RICC[metric_name]
    except KeyError:
        raise ValidationError(f"unknown metric name '{metric_name}'") from None


@dataclass(frozen=True, slots=True)
class MetricRecord:
    """One computed metric with its tags, parameters and input digests."""

    name: str
    value: float | None
    rational: str | None = None
    parameters: Mapping[str, Any] = field(default_factory=dict)
    provenance: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        ricc_tags(self.name)
        object.__setattr__(self, "parameters", dict(self.parameters))
        object.__setattr__(self, "provenance", dict(self.provenance))

    @property
    def ricc(self) -> tuple[str, ...]:
        return ricc_tags(self.name)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "rational": self.rational,
            "ricc": list(self.ricc),
            "parameters": dict(self.parameters),
            "provenance": dict(self.provenance),
        }


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def provenance(**paths) -> dict[str, str]:
    """sha256 digests of the named input files, skipping absent entries."""
    return {
        name: file_digest(path) for name, path in sorted(paths.items()) if path is not None
    }


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_report(payload: Any, out_path) -> str:
    """Write the canonical JSON report plus a timestamped sidecar; returns the digest."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    text = canonical_json(payload)
    out_path.write_text(text, encoding="utf-8")
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    sidecar = {
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "report": out_path.name,
        "sha256": digest,
    }
    out_path.with_name(out_path.name + ".meta.json").write_text(
        canonical_json(sidecar), encoding="utf-8"
    )
    return digest


def _format_value(record: dict) -> str:
    value = record.get("value")
    rational = record.get("rational")
    if value is None:
        return "n/a"
    head = f"{value:.6f}".rstrip("0").rstrip(".") or "0"
    return f"{head} ({rational})" if rational else head


def markdown_summary(payload: Mapping[str, Any]) -> str:
    """Short human-readable digest of a report payload."""
    lines = [f"# depmetrics report: {payload.get('command', 'run')}", ""]
    metrics = payload.get("metrics", [])
    if metrics:
        lines += ["| metric | value | dependability |", "| --- | --- | --- |"]
        for record in metrics:
            lines.append(
                f"| {record['name']} | {_format_value(record)} | "
                f"{', '.join(record['ricc'])} |"
            )
        lines.append("")
    notes = payload.get("notes", [])
    for note in notes:
        lines.append(f"- {note}")
    if notes:
        lines.append("")
    return "\n".join(lines)
