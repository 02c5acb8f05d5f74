"""Sampling-oriented MLP forecaster for multivariate time series.

A small, fully deterministic stack: a dense float64 kernel with
hand-derived backward passes, continuous/interval down-sampling,
information exchange blocks, the two-part model assembly, a CSV-to-window
data pipeline, Adam training with early stopping, the four standard
forecast metrics with analytic MAC accounting, and an experiment CLI.
"""

from .errors import ConfigError, DataError, LightTSError, NumericError, ShapeError
from .ieblock import IEBlockParams, IEBlockShape, ieblock_backward, ieblock_forward, mac_count, param_count
from .model import (
    LightTSConfig,
    ModelParams,
    build_ablation,
    forward,
    backward,
    init_params,
    model_mac_count,
    trainable_param_count,
)
from .sampling import SampleKind, SampleMatrix, continuous_sample, interval_sample, reconstruct

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DataError", "LightTSError", "NumericError", "ShapeError",
    "IEBlockParams", "IEBlockShape", "ieblock_backward", "ieblock_forward",
    "mac_count", "param_count",
    "LightTSConfig", "ModelParams", "build_ablation", "forward", "backward",
    "init_params", "model_mac_count", "trainable_param_count",
    "SampleKind", "SampleMatrix", "continuous_sample", "interval_sample", "reconstruct",
    "__version__",
]
