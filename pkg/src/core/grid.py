"""
图像网格、正弦图与角度集合
"""

from __future__ import annotations

from typing import Iterator, Sequence

import numpy as np

from ..utils.constants import (
    DEFAULT_PITCH_MM,
    PRESET_ANGLES,
    AnglePreset,
    IntensityDomain,
)
from ..utils.errors import DomainError, ShapeError


class ImageGrid:
    """
    方形图像

    带像素间距（毫米）和强度域标记
    """

    def __init__(
        self,
        values: np.ndarray,
        pitch_mm: float = DEFAULT_PITCH_MM,
        domain: IntensityDomain = IntensityDomain.NORMALIZED,
    ):
        """
        初始化图像

        Args:
            values: n×n 强度
            pitch_mm: 像素间距
            domain: 强度域（归一化或HU）
        """
        self.values = np.array(values, dtype=np.float64)
        self.pitch_mm = float(pitch_mm)
        self.domain = domain

        self._validate()

    def _validate(self) -> None:
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ShapeError(f"图像必须为方形二维数组: {self.values.shape}")
        if self.values.shape[0] < 2:
            raise ShapeError(f"图像边长必须 ≥ 2: {self.values.shape[0]}")
        if not self.pitch_mm > 0:
            raise ValueError(f"像素间距必须为正: {self.pitch_mm}")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("图像包含非有限值")
        if self.domain is IntensityDomain.NORMALIZED:
            if self.values.min() < 0.0 or self.values.max() > 1.0:
                raise DomainError(
                    f"归一化图像取值越界: [{self.values.min()}, {self.values.max()}]"
                )

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def with_values(
        self, values: np.ndarray, domain: IntensityDomain | None = None
    ) -> "ImageGrid":
        """用新数值创建同间距的图像"""
        return ImageGrid(values, self.pitch_mm, domain or self.domain)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ImageGrid):
            return False
        return (
            self.domain is other.domain
            and self.pitch_mm == other.pitch_mm
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self) -> str:
        return (
            f"ImageGrid(n={self.n}, pitch_mm={self.pitch_mm}, "
            f"domain={self.domain.value})"
        )


class AngleSet:
    """
    投影角度集合

    角度（度）严格递增，位于 [0, 180)
    """

    def __init__(self, angles_deg: Sequence[float], name: str | None = None):
        self.degrees = tuple(float(a) for a in angles_deg)
        self.name = name

        self._validate()

    def _validate(self) -> None:
        if not self.degrees:
            raise ValueError("角度列表为空")
        for angle in self.degrees:
            if not 0.0 <= angle < 180.0:
                raise ValueError(f"角度超出 [0, 180): {angle}")
        for first, second in zip(self.degrees, self.degrees[1:]):
            if second <= first:
                raise ValueError(f"角度必须严格递增: {self.degrees}")

    @classmethod
    def from_preset(cls, preset: AnglePreset | str) -> "AngleSet":
        """从预设名创建（four_view / two_view）"""
        try:
            preset = AnglePreset(preset)
        except ValueError:
            raise ValueError(f"未知的角度预设: {preset}") from None
        return cls(PRESET_ANGLES[preset], name=preset.value)

    @classmethod
    def uniform(cls, count: int) -> "AngleSet":
        """[0, 180) 内等间距的 count 个角度"""
        if count < 1:
            raise ValueError(f"角度数必须 ≥ 1: {count}")
        return cls([180.0 * k / count for k in range(count)], name=f"uniform_{count}")

    @property
    def radians(self) -> np.ndarray:
        return np.deg2rad(np.array(self.degrees))

    def key(self) -> str:
        """用于缓存哈希的规范字符串"""
        return ",".join(repr(a) for a in self.degrees)

    def __len__(self) -> int:
        return len(self.degrees)

    def __iter__(self) -> Iterator[float]:
        return iter(self.degrees)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, AngleSet) and self.degrees == other.degrees

    def __hash__(self) -> int:
        return hash(self.degrees)

    def __repr__(self) -> str:
        label = self.name or "custom"
        return f"AngleSet({label}: {list(self.degrees)})"


class Sinogram:
    """
    正弦图

    每个角度一行，每个探测器单元一列；探测器间距等于图像像素间距
    """

    def __init__(
        self,
        values: np.ndarray,
        angles: AngleSet,
        pitch_mm: float = DEFAULT_PITCH_MM,
        domain: IntensityDomain = IntensityDomain.NORMALIZED,
    ):
        self.values = np.array(values, dtype=np.float64)
        self.angles = angles
        self.pitch_mm = float(pitch_mm)
        self.domain = domain

        self._validate()

    def _validate(self) -> None:
        if self.values.ndim != 2 or self.values.shape[0] != len(self.angles):
            raise ShapeError(
                f"正弦图形状 {self.values.shape} 与角度数 {len(self.angles)} 不一致"
            )
        if self.values.shape[1] < 2:
            raise ShapeError(f"探测器单元数必须 ≥ 2: {self.values.shape[1]}")
        if not self.pitch_mm > 0:
            raise ValueError(f"探测器间距必须为正: {self.pitch_mm}")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("正弦图包含非有限值")

    @property
    def bins(self) -> int:
        return int(self.values.shape[1])

    def __repr__(self) -> str:
        return (
            f"Sinogram(angles={list(self.angles)}, bins={self.bins}, "
            f"pitch_mm={self.pitch_mm})"
        )


def angle_set(spec: AnglePreset | str | Sequence[float]) -> AngleSet:
    """由预设名或角度列表创建角度集合"""
    if isinstance(spec, (AnglePreset, str)):
        return AngleSet.from_preset(spec)
    return AngleSet(spec)


def uniform_angles(count: int) -> AngleSet:
    """稠密视角 FBP 用的等间距角度"""
    return AngleSet.uniform(count)
