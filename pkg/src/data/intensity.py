"""
HU 与归一化强度之间的仿射映射
normalized = (HU + 1000) / 3000
"""

import numpy as np

from ..core.grid import ImageGrid
from ..utils.constants import HU_MAX, HU_MIN, HU_SPAN, IntensityDomain
from ..utils.errors import DomainError


def hu_array_to_normalized(values: np.ndarray) -> np.ndarray:
    """
    HU 数组映射到 [0, 1]

    Raises:
        DomainError: 存在 [−1000, 2000] 以外的值
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size and (values.min() < HU_MIN or values.max() > HU_MAX):
        low, high = values.min(), values.max()
        raise DomainError(f"HU 值超出 [{HU_MIN}, {HU_MAX}]: [{low}, {high}]")
    return (values - HU_MIN) / HU_SPAN


def normalized_array_to_hu(values: np.ndarray) -> np.ndarray:
    return np.asarray(values, dtype=np.float64) * HU_SPAN + HU_MIN


def hu_to_normalized(img: ImageGrid) -> ImageGrid:
    """HU 图像 -> 归一化图像"""
    if img.domain is not IntensityDomain.HOUNSFIELD:
        raise DomainError(f"需要 HU 域图像，实际为 {img.domain.value}")
    normalized = np.clip(hu_array_to_normalized(img.values), 0.0, 1.0)
    return ImageGrid(normalized, img.pitch_mm, IntensityDomain.NORMALIZED)


def normalized_to_hu(img: ImageGrid) -> ImageGrid:
    """归一化图像 -> HU 图像"""
    if img.domain is not IntensityDomain.NORMALIZED:
        raise DomainError(f"需要归一化域图像，实际为 {img.domain.value}")
    hu = normalized_array_to_hu(img.values)
    return ImageGrid(hu, img.pitch_mm, IntensityDomain.HOUNSFIELD)
