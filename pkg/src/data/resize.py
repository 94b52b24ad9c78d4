"""
双线性缩放（角点对齐）
"""

from functools import lru_cache

import numpy as np

from ..core.grid import ImageGrid
from ..utils.constants import DEFAULT_PITCH_MM, IMAGE_SIZE, IntensityDomain
from ..utils.errors import ShapeError


@lru_cache(maxsize=8)
def interpolation_matrix(target: int, source: int) -> np.ndarray:
    """
    一维线性插值矩阵 (target × source)

    目标采样点 i 映射到源坐标 i·(source−1)/(target−1)，首尾角点对齐。
    每行权重非负且和为 1。
    """
    if target < 2 or source < 2:
        raise ShapeError(f"缩放两端尺寸都必须 ≥ 2: {source} -> {target}")
    positions = np.arange(target, dtype=np.float64) * (source - 1) / (target - 1)
    lower = np.minimum(np.floor(positions).astype(np.int64), source - 2)
    frac = positions - lower
    matrix = np.zeros((target, source), dtype=np.float64)
    rows = np.arange(target)
    matrix[rows, lower] = 1.0 - frac
    matrix[rows, lower + 1] += frac
    matrix.setflags(write=False)
    return matrix


def resize_batch(
    images: np.ndarray, size: int = IMAGE_SIZE, clamp: bool = True
) -> np.ndarray:
    """
    批量缩放 N×s×s -> N×size×size

    Args:
        images: 方形图像批
        size: 目标边长
        clamp: 是否截断到 [0, 1]
    """
    if images.ndim != 3 or images.shape[1] != images.shape[2]:
        raise ShapeError(f"缩放需要 N×s×s 数组: {images.shape}")
    matrix = interpolation_matrix(size, images.shape[1])
    out = np.matmul(np.matmul(matrix, images), matrix.T)
    if clamp:
        np.clip(out, 0.0, 1.0, out=out)
    return out


def resize_bilinear(
    img: ImageGrid, size: int = IMAGE_SIZE, pitch_mm: float = DEFAULT_PITCH_MM
) -> ImageGrid:
    """
    缩放单幅图像

    默认把 28×28 数字放大到 64×64，并按每像素 5 mm 赋予新间距。
    归一化域结果截断到 [0, 1]。
    """
    clamp = img.domain is IntensityDomain.NORMALIZED
    values = resize_batch(img.values[np.newaxis], size, clamp=clamp)[0]
    return ImageGrid(values, pitch_mm, img.domain)
