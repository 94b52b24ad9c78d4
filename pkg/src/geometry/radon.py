"""
平行束投影与滤波反投影
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..core.grid import AngleSet, ImageGrid, Sinogram
from ..core.ops import tiled_matmul
from ..core.tensor import Tensor
from ..utils.constants import IntensityDomain
from ..utils.errors import ShapeError

# 轴对齐角度使用精确的方向余弦
_EXACT_DIRECTIONS = {0.0: (1.0, 0.0), 90.0: (0.0, 1.0)}
_AXIS_TOL = 1e-12


def _direction(theta_deg: float) -> tuple[float, float]:
    if theta_deg in _EXACT_DIRECTIONS:
        return _EXACT_DIRECTIONS[theta_deg]
    theta = np.deg2rad(theta_deg)
    return float(np.cos(theta)), float(np.sin(theta))


def _ray_samples(
    n: int, cos_t: float, sin_t: float, t: float
) -> tuple[np.ndarray, ...]:
    """
    一条射线上的积分采样点

    射线: (x, y) = t·(cos, sin) + s·(-sin, cos)，坐标以像素为单位，图像中心为原点。
    沿主方向逐行/逐列步进，每一步在另一方向网格线处再切分，
    每段用 Simpson 公式积分（对双线性图像模型精确）。

    Returns:
        (x, y, weight) 采样点坐标与积分权重
    """
    c = (n - 1) / 2.0
    half = c + 1.0
    grid_lines = np.arange(-1, n + 1, dtype=np.float64) - c

    s_lo, s_hi = -np.inf, np.inf
    breakpoints = []
    if abs(sin_t) > _AXIS_TOL:
        edges = sorted(((t * cos_t - half) / sin_t, (t * cos_t + half) / sin_t))
        s_lo, s_hi = max(s_lo, edges[0]), min(s_hi, edges[1])
        breakpoints.append((t * cos_t - grid_lines) / sin_t)
    elif abs(t * cos_t) > half:
        return np.empty(0), np.empty(0), np.empty(0)
    if abs(cos_t) > _AXIS_TOL:
        edges = sorted(((-half - t * sin_t) / cos_t, (half - t * sin_t) / cos_t))
        s_lo, s_hi = max(s_lo, edges[0]), min(s_hi, edges[1])
        breakpoints.append((grid_lines - t * sin_t) / cos_t)
    elif abs(t * sin_t) > half:
        return np.empty(0), np.empty(0), np.empty(0)

    if not s_hi > s_lo:
        return np.empty(0), np.empty(0), np.empty(0)

    s = np.concatenate(breakpoints + [np.array([s_lo, s_hi])])
    s = np.unique(s[(s >= s_lo) & (s <= s_hi)])
    start, stop = s[:-1], s[1:]
    length = stop - start
    mid = 0.5 * (start + stop)

    points = np.concatenate([start, mid, stop])
    weights = np.concatenate([length / 6.0, 4.0 * length / 6.0, length / 6.0])
    x = t * cos_t - points * sin_t
    y = t * sin_t + points * cos_t
    return x, y, weights


def _bilinear_scatter(
    row: np.ndarray, n: int, x: np.ndarray, y: np.ndarray, weights: np.ndarray
) -> None:
    """把采样点的权重按双线性插值分配到像素（图像外的贡献为 0）"""
    c = (n - 1) / 2.0
    u = x + c  # 列坐标
    v = c - y  # 行坐标
    j0 = np.floor(u).astype(np.int64)
    i0 = np.floor(v).astype(np.int64)
    fu = u - j0
    fv = v - i0
    for di, dj, w in (
        (0, 0, (1.0 - fv) * (1.0 - fu)),
        (0, 1, (1.0 - fv) * fu),
        (1, 0, fv * (1.0 - fu)),
        (1, 1, fv * fu),
    ):
        ii, jj = i0 + di, j0 + dj
        valid = (ii >= 0) & (ii < n) & (jj >= 0) & (jj < n)
        np.add.at(row, ii[valid] * n + jj[valid], weights[valid] * w[valid])


@lru_cache(maxsize=16)
def system_matrix(n: int, angles_deg: tuple[float, ...], pitch_mm: float) -> np.ndarray:
    """
    投影系统矩阵 (|angles|·n) × (n·n)

    第 a·n + k 行是角度 a、探测器单元 k 的线积分权重（单位: 毫米）。
    探测器单元 k 的偏移为 (k − (n−1)/2)·pitch。
    """
    c = (n - 1) / 2.0
    matrix = np.zeros((len(angles_deg) * n, n * n), dtype=np.float64)
    for a, theta in enumerate(angles_deg):
        cos_t, sin_t = _direction(theta)
        for k in range(n):
            x, y, weights = _ray_samples(n, cos_t, sin_t, k - c)
            if weights.size:
                _bilinear_scatter(matrix[a * n + k], n, x, y, weights)
    matrix *= pitch_mm
    matrix.setflags(write=False)
    return matrix


def project_batch(images: np.ndarray, angles: AngleSet, pitch_mm: float) -> np.ndarray:
    """
    批量投影

    Args:
        images: N×n×n 图像数组
        angles: 投影角度
        pitch_mm: 像素/探测器间距

    Returns:
        N×|angles|×n 正弦图数组
    """
    if images.ndim != 3 or images.shape[1] != images.shape[2]:
        raise ShapeError(f"批量投影需要 N×n×n 数组: {images.shape}")
    count, n = images.shape[0], images.shape[1]
    matrix = system_matrix(n, angles.degrees, float(pitch_mm))
    flat = images.reshape(count, n * n)
    return tiled_matmul(flat, matrix.T).reshape(count, len(angles), n)


def forward_project(img: ImageGrid, angles: AngleSet) -> Sinogram:
    """
    平行束 Radon 变换

    Args:
        img: 方形图像
        angles: 投影角度（非空）

    Returns:
        探测器单元数等于 img.n 的正弦图
    """
    values = project_batch(img.values[np.newaxis], angles, img.pitch_mm)[0]
    return Sinogram(values, angles, img.pitch_mm, img.domain)


def _next_power_of_two(value: int) -> int:
    return 1 << max(0, int(value - 1).bit_length())


def ram_lak_response(size: int) -> np.ndarray:
    """
    Ram-Lak 斜坡滤波器的频率响应（单位像素间距）

    由空域离散核 h[0]=1/4, h[奇数 k]=−1/(π²k²) 变换得到，避免直流偏置
    """
    k = np.fft.fftfreq(size, d=1.0 / size)
    kernel = np.zeros(size, dtype=np.float64)
    kernel[k == 0] = 0.25
    odd = (k.astype(np.int64) % 2) == 1
    kernel[odd] = -1.0 / (np.pi * k[odd]) ** 2
    return np.real(np.fft.fft(kernel))


def filter_projections(values: np.ndarray, pitch_mm: float) -> np.ndarray:
    """逐行斜坡滤波，零填充到 ≥ 2·bins 的下一个2的幂"""
    bins = values.shape[1]
    size = _next_power_of_two(2 * bins)
    padded = np.zeros((values.shape[0], size), dtype=np.float64)
    padded[:, :bins] = values / pitch_mm
    spectrum = np.fft.fft(padded, axis=1) * ram_lak_response(size)
    return np.real(np.fft.ifft(spectrum, axis=1))[:, :bins]


def backproject(filtered: np.ndarray, angles: AngleSet) -> np.ndarray:
    """像素驱动反投影，探测器方向线性插值，乘以 π/|angles|"""
    bins = filtered.shape[1]
    c = (bins - 1) / 2.0
    coords = np.arange(bins, dtype=np.float64) - c
    x = coords[np.newaxis, :]
    y = -coords[:, np.newaxis]
    detector = np.arange(bins, dtype=np.float64)

    recon = np.zeros((bins, bins), dtype=np.float64)
    for row, theta in zip(filtered, angles):
        cos_t, sin_t = _direction(theta)
        position = x * cos_t + y * sin_t + c
        values = np.interp(position.ravel(), detector, row, left=0.0, right=0.0)
        recon += values.reshape(bins, bins)
    return recon * (np.pi / len(angles))


def fbp_reconstruct(sino: Sinogram) -> ImageGrid:
    """
    滤波反投影重建

    Args:
        sino: 正弦图（≥ 1 个角度）

    Returns:
        重建图像；归一化域的正弦图结果截断到 [0, 1]
    """
    filtered = filter_projections(sino.values, sino.pitch_mm)
    recon = backproject(filtered, sino.angles)
    if sino.domain is IntensityDomain.NORMALIZED:
        recon = np.clip(recon, 0.0, 1.0)
    return ImageGrid(recon, sino.pitch_mm, sino.domain)


def normalization_scale(bins: int, pitch_mm: float) -> float:
    """网络输入缩放因子 bins × pitch"""
    return bins * pitch_mm


def normalize_sinogram(sino: Sinogram) -> Tensor:
    """
    网络输入归一化

    除以 bins × pitch，使整幅宽度的单位强度物体约映射到 1.0；按角度优先展平
    """
    scale = normalization_scale(sino.bins, sino.pitch_mm)
    return Tensor((sino.values / scale).reshape(-1))


def normalize_projections(values: np.ndarray, pitch_mm: float) -> np.ndarray:
    """批量版本：N×|angles|×bins -> N×(|angles|·bins)"""
    count, _, bins = values.shape
    return (values / normalization_scale(bins, pitch_mm)).reshape(count, -1)
