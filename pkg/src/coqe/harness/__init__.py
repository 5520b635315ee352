from .config import ConfigError, config_hash, load_config, preset_path
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .runlog import MetricWriter, read_metrics
from .train import (
    TrainingDiverged,
    build_model,
    run_arithmetic,
    run_classification,
    run_regression,
)

__all__ = [
    "CheckpointError",
    "ConfigError",
    "MetricWriter",
    "TrainingDiverged",
    "build_model",
    "config_hash",
    "load_checkpoint",
    "load_config",
    "preset_path",
    "read_metrics",
    "run_arithmetic",
    "run_classification",
    "run_regression",
    "save_checkpoint",
]
