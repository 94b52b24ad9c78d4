"""
对比图渲染
每行一个样本，三列依次为真值 / FBP / AUTOMAP，写为 8 位灰度 PGM
"""

from __future__ import annotations

import os
from typing import Sequence, Union

import numpy as np

from ..core.grid import ImageGrid
from ..services.formats import write_pgm
from ..utils.constants import HU_MIN, HU_SPAN, IntensityDomain
from ..utils.errors import ShapeError

SEPARATOR = 2
SEPARATOR_VALUE = 255
COLUMNS = 3

GridRow = tuple[ImageGrid, ImageGrid, ImageGrid]


def window_to_bytes(img: ImageGrid) -> np.ndarray:
    """
    线性窗口化到 [0, 255]，向下取整

    HU 图像先按 (HU + 1000)/3000 映射到 [0, 1]
    """
    values = img.values
    if img.domain is IntensityDomain.HOUNSFIELD:
        values = (values - HU_MIN) / HU_SPAN
    values = np.clip(values, 0.0, 1.0)
    return np.floor(values * 255.0).astype(np.uint8)


def compose_grid(samples: Sequence[GridRow]) -> np.ndarray:
    """
    拼接对比图

    Returns:
        (rows·n + 2·(rows−1)) × (3·n + 2·2) 的 uint8 数组，分隔线为 255
    """
    if not samples:
        raise ValueError("对比图至少需要一个样本")
    n = samples[0][0].n
    for row in samples:
        if len(row) != COLUMNS or any(img.n != n for img in row):
            raise ShapeError(f"对比图中所有图像必须是 {n}×{n}")

    rows = len(samples)
    height = rows * n + SEPARATOR * (rows - 1)
    width = COLUMNS * n + SEPARATOR * (COLUMNS - 1)
    canvas = np.full((height, width), SEPARATOR_VALUE, dtype=np.uint8)
    for r, row in enumerate(samples):
        top = r * (n + SEPARATOR)
        for c, img in enumerate(row):
            left = c * (n + SEPARATOR)
            canvas[top : top + n, left : left + n] = window_to_bytes(img)
    return canvas


def render_grid(
    samples: Sequence[GridRow], path: Union[str, os.PathLike]
) -> np.ndarray:
    """写出对比图并返回像素数组"""
    canvas = compose_grid(samples)
    write_pgm(path, canvas)
    return canvas
