"""Transformer encoders for gait recognition from inertial sensors.

Submodules: ``numeric`` (primitives and gradient checking), ``encodings``,
``attention``, ``blocks`` (layers and the nine architectures), ``data``,
``training``, ``evaluation`` and ``harness`` (benchmark and gradient suites).
"""

from .blocks import VARIANTS, GaitModel, ModelConfig, build_model, load_checkpoint, save_checkpoint
from .errors import (
    ConfigError,
    ContractError,
    DegenerateMaskError,
    DivergenceError,
    GaitformerError,
    SchemaError,
    ShapeError,
)

__version__ = "0.1.0"

__all__ = [
    "VARIANTS",
    "ConfigError",
    "ContractError",
    "DegenerateMaskError",
    "DivergenceError",
    "GaitModel",
    "GaitformerError",
    "ModelConfig",
    "SchemaError",
    "ShapeError",
    "build_model",
    "load_checkpoint",
    "save_checkpoint",
]
