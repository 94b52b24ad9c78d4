"""
训练引擎模块
"""

from .train_config import TrainConfig
from .optimizer import (
    OptimizerState,
    load_optimizer_state,
    rmsprop_step,
    save_optimizer_state,
)
from .sinogram_cache import SinogramStore, geometry_key, precompute_sinograms
from .trainer import (
    LossRecord,
    TrainResult,
    epoch_batches,
    load_checkpoint,
    save_checkpoint,
    train,
    train_step,
)
from .oracle_training import oracle_train_config, train_oracle

__all__ = [
    "TrainConfig",
    "OptimizerState",
    "load_optimizer_state",
    "rmsprop_step",
    "save_optimizer_state",
    "SinogramStore",
    "geometry_key",
    "precompute_sinograms",
    "LossRecord",
    "TrainResult",
    "epoch_batches",
    "load_checkpoint",
    "save_checkpoint",
    "train",
    "train_step",
    "oracle_train_config",
    "train_oracle",
]
