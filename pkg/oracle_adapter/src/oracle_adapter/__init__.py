"""Reference inference oracle for the depmetrics wire protocol."""

from .dump import dump_activations, iter_manifest
from .models import (
    DEMO_CLASSES,
    AdapterConfig,
    ConstantModel,
    GeometricModel,
    ModelError,
    TorchClassifier,
    build_demo_net,
    load_model,
)
from .protocol import PROTOCOL_NAME, PROTOCOL_VERSION, serve

__version__ = "0.1.0"

__all__ = [
    "AdapterConfig",
    "ConstantModel",
    "DEMO_CLASSES",
    "GeometricModel",
    "ModelError",
    "PROTOCOL_NAME",
    "PROTOCOL_VERSION",
    "TorchClassifier",
    "build_demo_net",
    "dump_activations",
    "iter_manifest",
    "load_model",
    "serve",
]
