"""Dependability metrics for neural networks.

Library + CLI computing scenario pair-coverage, neuron k-activation and
activation-pattern metrics, adversarial confidence loss, occlusion
interpretation/sensitivity metrics and weighted confusion / scenario
degradation from dataset manifests, activation dumps and model outputs
obtained through an external inference oracle.
"""

from .confusion import (
    DEFAULT_WEIGHTS,
    ConfusionReport,
    DegradationReport,
    WeightMatrix,
    degradation,
    load_weight_matrix,
    weighted_confusion,
)
from .errors import DepmetricsError, OracleError, ValidationError
from .formats import (
    load_activations,
    load_manifest,
    load_predictions,
    load_scenario_space,
    write_activations,
    write_manifest,
    write_predictions,
)
from .model import (
    BBox,
    ActivationRecord,
    Condition,
    DataPoint,
    DatasetManifest,
    Detection,
    GroundTruth,
    ObjectLabel,
    PredictionRecord,
    Scenario,
    ScenarioSpace,
    jaccard,
)
from .neuron import ActivationMatrix, KActivationReport, PatternReport, k_activation, pattern_metric
from .occlusion import (
    Heatmap,
    OccluderSpec,
    PixelSets,
    Target,
    compute_heatmap,
    interpret_metric,
    occsen_metric,
    pixel_sets,
    rho_sweep,
)
from .oracle import OracleRequest, OracleResponse, OracleSession, spawn
from .perturb import AdvReport, Transformer, adv_loss, apply_transform
from .scenario import CoverageReport, Suggestion, scene_coverage, suggest_scenarios

__version__ = "0.1.0"

__all__ = [
    "ActivationMatrix",
    "ActivationRecord",
    "AdvReport",
    "BBox",
    "Condition",
    "ConfusionReport",
    "CoverageReport",
    "DEFAULT_WEIGHTS",
    "DataPoint",
    "DatasetManifest",
    "DegradationReport",
    "DepmetricsError",
    "Detection",
    "GroundTruth",
    "Heatmap",
    "KActivationReport",
    "ObjectLabel",
    "OccluderSpec",
    "OracleError",
    "OracleRequest",
    "OracleResponse",
    "OracleSession",
    "PatternReport",
    "PixelSets",
    "PredictionRecord",
    "Scenario",
    "ScenarioSpace",
    "Suggestion",
    "Target",
    "Transformer",
    "ValidationError",
    "WeightMatrix",
    "adv_loss",
    "apply_transform",
    "compute_heatmap",
    "degradation",
    "interpret_metric",
    "jaccard",
    "k_activation",
    "load_activations",
    "load_manifest",
    "load_predictions",
    "load_scenario_space",
    "load_weight_matrix",
    "occsen_metric",
    "pattern_metric",
    "pixel_sets",
    "rho_sweep",
    "scene_coverage",
    "spawn",
    "suggest_scenarios",
    "weighted_confusion",
    "write_activations",
    "write_manifest",
    "write_predictions",
]
