"""Physics-assisted spatio-temporal video prediction.

Two fused branches: a spectral-filter path that mixes Fourier coefficients of
patch tokens, and a discrete path that quantizes encoder latents against a
learned memory bank before temporal propagation. Ships with synthetic PDE
data generators (bouncing glyphs, vorticity-form Navier-Stokes, shallow-water
dam break) and the evaluation metrics used to score predictions.
"""

__version__ = "0.1.0"

from .config import ModelConfig
from .errors import (
    BadMagicError,
    CheckpointError,
    ConfigurationError,
    ContainerError,
    MetricError,
    PastNetError,
    ShapeMismatchError,
    SolverDivergedError,
    TrailingBytesError,
    TrainingDivergedError,
    TruncatedPayloadError,
)
from .model import PastNet, build_model, fuse, predict

__all__ = [
    "ModelConfig",
    "PastNet",
    "build_model",
    "fuse",
    "predict",
    "PastNetError",
    "ConfigurationError",
    "ShapeMismatchError",
    "TrainingDivergedError",
    "SolverDivergedError",
    "MetricError",
    "ContainerError",
    "BadMagicError",
    "TruncatedPayloadError",
    "TrailingBytesError",
    "CheckpointError",
]
