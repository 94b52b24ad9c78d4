"""
工具模块
"""

from .constants import (
    IntensityDomain,
    AnglePreset,
    Mode,
    ModelPreset,
    Experiment,
    SplitProtocol,
    PRESET_ANGLES,
    DEFAULT_PITCH_MM,
    HU_MIN,
    HU_MAX,
)
from .errors import (
    ShapeError,
    DomainError,
    ConfigError,
    FormatError,
    NumericError,
    OracleGateError,
)

__all__ = [
    "IntensityDomain",
    "AnglePreset",
    "Mode",
    "ModelPreset",
    "Experiment",
    "SplitProtocol",
    "PRESET_ANGLES",
    "DEFAULT_PITCH_MM",
    "HU_MIN",
    "HU_MAX",
    "ShapeError",
    "DomainError",
    "ConfigError",
    "FormatError",
    "NumericError",
    "OracleGateError",
]
