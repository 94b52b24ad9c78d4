"""
椭圆体模生成器
在空气背景上生成带软组织体轮廓和内部结构的 HU 图像
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from ..core.grid import AngleSet, ImageGrid
from ..geometry.radon import forward_project
from ..services.formats import save_image, save_sinogram
from ..utils.constants import (
    DEFAULT_PITCH_MM,
    HU_AIR,
    HU_MAX,
    HU_MIN,
    IMAGE_SIZE,
    IntensityDomain,
)
from .intensity import hu_to_normalized
from .records import ImageCollection, LabeledImage

Range = tuple[float, float]

# 内部椭圆边界采样点数
_BOUNDARY_POINTS = 64


@dataclass(frozen=True)
class Ellipse:
    """
    椭圆（坐标以半视野为单位，中心为原点，y 轴向上）
    """

    cx: float
    cy: float
    a: float
    b: float
    theta_deg: float
    hu: float

    def level(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """椭圆方程左侧的值，≤ 1 表示在椭圆内"""
        theta = np.deg2rad(self.theta_deg)
        dx, dy = x - self.cx, y - self.cy
        u = dx * np.cos(theta) + dy * np.sin(theta)
        v = -dx * np.sin(theta) + dy * np.cos(theta)
        return (u / self.a) ** 2 + (v / self.b) ** 2

    def contains(self, x: np.ndarray, y: np.ndarray, scale: float = 1.0) -> np.ndarray:
        return self.level(x, y) <= scale * scale

    def boundary(self, count: int = _BOUNDARY_POINTS) -> tuple[np.ndarray, np.ndarray]:
        phi = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
        theta = np.deg2rad(self.theta_deg)
        u, v = self.a * np.cos(phi), self.b * np.sin(phi)
        x = self.cx + u * np.cos(theta) - v * np.sin(theta)
        y = self.cy + u * np.sin(theta) + v * np.cos(theta)
        return x, y

    def scaled(self, factor: float) -> "Ellipse":
        a, b = self.a * factor, self.b * factor
        return Ellipse(self.cx, self.cy, a, b, self.theta_deg, self.hu)


@dataclass(frozen=True)
class PhantomSpec:
    """
    体模参数

    体轮廓半轴、中心抖动、内部椭圆数量与大小、HU 范围都在这里给出
    """

    size: int = IMAGE_SIZE
    pitch_mm: float = DEFAULT_PITCH_MM
    background_hu: float = HU_AIR
    body_a: Range = (0.7, 0.9)
    body_b: Range = (0.5, 0.75)
    body_jitter: float = 0.05
    body_rotation_deg: Range = (-10.0, 10.0)
    body_hu: Range = (0.0, 60.0)
    interior_count: tuple[int, int] = (2, 6)
    interior_axis: Range = (0.05, 0.3)
    interior_hu: Range = (-900.0, 1500.0)
    containment_margin: float = 0.98
    max_attempts: int = 50

    def __post_init__(self) -> None:
        self._validate()

    def _validate(self) -> None:
        if self.size < 2:
            raise ValueError(f"体模边长必须 ≥ 2: {self.size}")
        if not self.pitch_mm > 0:
            raise ValueError(f"像素间距必须为正: {self.pitch_mm}")
        for name in (
            "body_a",
            "body_b",
            "body_rotation_deg",
            "body_hu",
            "interior_axis",
            "interior_hu",
        ):
            low, high = getattr(self, name)
            if low > high:
                raise ValueError(f"{name} 范围无效: {low} > {high}")
        if not HU_MIN <= self.background_hu <= HU_MAX:
            raise ValueError(f"背景 HU 超出范围: {self.background_hu}")
        for name in ("body_hu", "interior_hu"):
            low, high = getattr(self, name)
            if low < HU_MIN or high > HU_MAX:
                raise ValueError(f"{name} 超出 HU 范围 [{HU_MIN}, {HU_MAX}]: {low}, {high}")
        if max(self.body_a[1], self.body_b[1]) + self.body_jitter > 1.0:
            raise ValueError("体轮廓超出视野")
        if self.body_a[0] <= 0 or self.body_b[0] <= 0 or self.interior_axis[0] <= 0:
            raise ValueError("椭圆半轴必须为正")
        low, high = self.interior_count
        if low < 0 or low > high:
            raise ValueError(f"内部椭圆数量范围无效: {self.interior_count}")
        if not 0 < self.containment_margin <= 1:
            raise ValueError(f"包含裕度必须在 (0, 1]: {self.containment_margin}")


def _uniform(rng: np.random.Generator, bounds: Range) -> float:
    return float(rng.uniform(bounds[0], bounds[1]))


def _interior_ellipse(
    spec: PhantomSpec, body: Ellipse, rng: np.random.Generator
) -> Ellipse | None:
    """
    在体轮廓内采样一个内部椭圆

    中心取在体轮廓 0.7 倍以内；边界点超出体轮廓时缩小半轴重试
    """
    rho = 0.7 * np.sqrt(rng.uniform())
    phi = rng.uniform(0.0, 2.0 * np.pi)
    theta = np.deg2rad(body.theta_deg)
    u, v = rho * body.a * np.cos(phi), rho * body.b * np.sin(phi)
    cx = body.cx + u * np.cos(theta) - v * np.sin(theta)
    cy = body.cy + u * np.sin(theta) + v * np.cos(theta)

    candidate = Ellipse(
        float(cx),
        float(cy),
        _uniform(rng, spec.interior_axis),
        _uniform(rng, spec.interior_axis),
        float(rng.uniform(0.0, 180.0)),
        _uniform(rng, spec.interior_hu),
    )
    for _ in range(spec.max_attempts):
        bx, by = candidate.boundary()
        if np.all(body.contains(bx, by, spec.containment_margin)):
            return candidate
        candidate = candidate.scaled(0.9)
    return None


def phantom_layout(spec: PhantomSpec, seed: int) -> list[Ellipse]:
    """
    由种子确定的椭圆列表，第一个是体轮廓

    后出现的椭圆覆盖先出现的
    """
    rng = np.random.default_rng(seed)
    body = Ellipse(
        _uniform(rng, (-spec.body_jitter, spec.body_jitter)),
        _uniform(rng, (-spec.body_jitter, spec.body_jitter)),
        _uniform(rng, spec.body_a),
        _uniform(rng, spec.body_b),
        _uniform(rng, spec.body_rotation_deg),
        _uniform(rng, spec.body_hu),
    )
    low, high = spec.interior_count
    count = int(rng.integers(low, high + 1))
    layout = [body]
    for _ in range(count):
        ellipse = _interior_ellipse(spec, body, rng)
        if ellipse is not None:
            layout.append(ellipse)
    return layout


def pixel_coordinates(size: int) -> tuple[np.ndarray, np.ndarray]:
    """像素中心坐标（半视野单位）: x 向右，y 向上"""
    c = (size - 1) / 2.0
    coords = (np.arange(size, dtype=np.float64) - c) / (size / 2.0)
    return coords[np.newaxis, :], -coords[:, np.newaxis]


def render_layout(spec: PhantomSpec, layout: Sequence[Ellipse]) -> np.ndarray:
    """把椭圆列表栅格化为 HU 数组"""
    x, y = pixel_coordinates(spec.size)
    values = np.full((spec.size, spec.size), spec.background_hu, dtype=np.float64)
    for ellipse in layout:
        values[ellipse.contains(x, y)] = ellipse.hu
    return values


def generate_phantom(spec: PhantomSpec, seed: int, phantom_id: int = 0) -> LabeledImage:
    """
    生成一个 HU 域体模

    Args:
        spec: 体模参数
        seed: 随机种子（同种子结果相同）
        phantom_id: 作为标签的体模编号

    Returns:
        HU 域的 LabeledImage
    """
    values = render_layout(spec, phantom_layout(spec, seed))
    image = ImageGrid(values, spec.pitch_mm, IntensityDomain.HOUNSFIELD)
    return LabeledImage(image, phantom_id, is_digit=False)


def item_seed(seed: int, index: int) -> int:
    """第 index 个体模的种子: seed XOR index"""
    return int(seed) ^ int(index)


def generate_phantom_set(
    spec: PhantomSpec, count: int, seed: int, start: int = 0
) -> ImageCollection:
    """
    生成 count 个体模，编号从 start 开始

    第 i 个体模使用种子 seed XOR i，可独立并行生成
    """
    if count < 1:
        raise ValueError(f"体模数量必须为正: {count}")
    indices = range(start, start + count)
    images = np.stack(
        [render_layout(spec, phantom_layout(spec, item_seed(seed, i))) for i in indices]
    )
    return ImageCollection(
        images,
        np.array(list(indices)),
        spec.pitch_mm,
        IntensityDomain.HOUNSFIELD,
        is_digit=False,
    )


def write_phantom_set(
    directory: Union[str, os.PathLike], phantoms: ImageCollection, angles: AngleSet
) -> list[Path]:
    """
    写出体模目录

    每个体模写 phantom_XXXX.img（HU 真值）和 phantom_XXXX.sino（归一化衰减的正弦图）

    Returns:
        写出的文件路径列表
    """
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    written = []
    for record in phantoms:
        stem = root / f"phantom_{record.label:04d}"
        save_image(stem.with_suffix(".img"), record.image)
        sino = forward_project(hu_to_normalized(record.image), angles)
        save_sinogram(stem.with_suffix(".sino"), sino)
        written.extend([stem.with_suffix(".img"), stem.with_suffix(".sino")])
    return written
