"""
模型模块
AUTOMAP 网络与数字判别器
"""

from .automap import (
    AutomapConfig,
    AutomapParams,
    forward,
    init_params,
    load_params,
    parameter_count,
    reconstruct,
    save_params,
)
from .oracle import DigitOracle, load_oracle, save_oracle

__all__ = [
    "AutomapConfig",
    "AutomapParams",
    "forward",
    "init_params",
    "load_params",
    "parameter_count",
    "reconstruct",
    "save_params",
    "DigitOracle",
    "load_oracle",
    "save_oracle",
]
