"""
核心数据结构模块
"""

from .tensor import Tensor, ComputationTape, backward
from .ops import (
    RunningStats,
    add,
    add_bias,
    batchnorm,
    conv2d,
    matmul,
    mse_loss,
    relu_act,
    reshape,
    softmax_cross_entropy,
    sum_all,
    tanh_act,
)
from .grid import AngleSet, ImageGrid, Sinogram, angle_set, uniform_angles

__all__ = [
    "Tensor",
    "ComputationTape",
    "backward",
    "RunningStats",
    "add",
    "add_bias",
    "batchnorm",
    "conv2d",
    "matmul",
    "mse_loss",
    "relu_act",
    "reshape",
    "softmax_cross_entropy",
    "sum_all",
    "tanh_act",
    "AngleSet",
    "ImageGrid",
    "Sinogram",
    "angle_set",
    "uniform_angles",
]
