"""
投影与滤波反投影测试
"""

import numpy as np
import pytest

from src.core.grid import AngleSet, ImageGrid, Sinogram, angle_set, uniform_angles
from src.data.intensity import hu_to_normalized
from src.data.phantom import PhantomSpec, generate_phantom
from src.evaluation.metrics import rmse
from src.geometry.radon import (
    fbp_reconstruct,
    filter_projections,
    forward_project,
    normalize_projections,
    normalize_sinogram,
    project_batch,
    ram_lak_response,
    system_matrix,
)
from src.utils.constants import IntensityDomain
from src.utils.errors import ShapeError


def bilinear_value(img: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """图像中心为原点的双线性插值，图像外为 0"""
    n = img.shape[0]
    c = (n - 1) / 2.0
    padded = np.zeros((n + 2, n + 2))
    padded[1:-1, 1:-1] = img
    u = x + c + 1.0
    v = c - y + 1.0
    inside = (u >= 0) & (u <= n + 1) & (v >= 0) & (v <= n + 1)
    u = np.clip(u, 0, n + 1 - 1e-12)
    v = np.clip(v, 0, n + 1 - 1e-12)
    j0 = np.floor(u).astype(int)
    i0 = np.floor(v).astype(int)
    fu = u - j0
    fv = v - i0
    j1 = np.minimum(j0 + 1, n + 1)
    i1 = np.minimum(i0 + 1, n + 1)
    value = (
        padded[i0, j0] * (1 - fv) * (1 - fu)
        + padded[i0, j1] * (1 - fv) * fu
        + padded[i1, j0] * fv * (1 - fu)
        + padded[i1, j1] * fv * fu
    )
    return np.where(inside, value, 0.0)


def dense_line_integral(img: np.ndarray, theta_deg: float, pitch: float) -> np.ndarray:
    """沿每条射线取 2000 个中点采样的参考线积分"""
    n = img.shape[0]
    c = (n - 1) / 2.0
    theta = np.deg2rad(theta_deg)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    span = float(n)
    count = 2000
    ds = 2 * span / count
    s = -span + ds * (np.arange(count) + 0.5)
    result = np.zeros(n)
    for k in range(n):
        t = k - c
        x = t * cos_t - s * sin_t
        y = t * sin_t + s * cos_t
        result[k] = bilinear_value(img, x, y).sum() * ds
    return result * pitch


def disk(n: int, radius: float) -> np.ndarray:
    c = (n - 1) / 2.0
    yy, xx = np.mgrid[0:n, 0:n]
    return ((xx - c) ** 2 + (yy - c) ** 2 <= radius**2).astype(np.float64)


class TestAngleSet:
    """测试角度集合"""

    def test_presets(self):
        """测试四视角与两视角预设"""
        assert AngleSet.from_preset("four_view").degrees == (0.0, 45.0, 90.0, 135.0)
        assert AngleSet.from_preset("two_view").degrees == (0.0, 90.0)

    def test_unknown_preset(self):
        """测试未知预设"""
        with pytest.raises(ValueError):
            AngleSet.from_preset("three_view")

    @pytest.mark.parametrize("angles", [[], [0.0, 0.0], [90.0, 45.0], [180.0], [-1.0]])
    def test_invalid_angles(self, angles):
        """测试空、重复、非递增和越界的角度"""
        with pytest.raises(ValueError):
            AngleSet(angles)

    def test_uniform(self):
        """测试等间距角度"""
        angles = AngleSet.uniform(4)
        assert angles.degrees == (0.0, 45.0, 90.0, 135.0)

    def test_module_helpers(self):
        """测试 angle_set 与 uniform_angles"""
        assert angle_set("two_view") == AngleSet([0.0, 90.0])
        assert angle_set([10.0, 20.0]).degrees == (10.0, 20.0)
        assert len(uniform_angles(180)) == 180


class TestForwardProject:
    """测试平行束投影"""

    def test_ones_at_zero_degrees(self):
        """测试 4×4 全 1 图像在 0° 的投影"""
        img = ImageGrid(np.ones((4, 4)), pitch_mm=1.0)
        sino = forward_project(img, AngleSet([0.0]))
        assert np.allclose(sino.values[0], [4.0, 4.0, 4.0, 4.0], atol=1e-12)

    def test_pitch_scales_projection(self):
        """测试投影值按像素间距（毫米）缩放"""
        img = np.ones((4, 4))
        unit = forward_project(ImageGrid(img, 1.0), AngleSet([0.0]))
        scaled = forward_project(ImageGrid(img, 5.0), AngleSet([0.0]))
        assert np.allclose(scaled.values, 5.0 * unit.values)
        assert scaled.pitch_mm == 5.0

    def test_zero_degrees_is_column_sums(self, rng):
        """测试 0° 的第 k 个单元为第 k 列之和"""
        img = rng.uniform(0, 1, size=(6, 6))
        sino = forward_project(ImageGrid(img, 2.0), AngleSet([0.0]))
        assert np.allclose(sino.values[0], img.sum(axis=0) * 2.0, atol=1e-12)

    def test_ninety_degrees_is_reversed_row_sums(self, rng):
        """测试 90° 的第 k 个单元为第 n−1−k 行之和"""
        img = rng.uniform(0, 1, size=(6, 6))
        sino = forward_project(ImageGrid(img, 1.0), AngleSet([90.0]))
        assert np.allclose(sino.values[0], img.sum(axis=1)[::-1], atol=1e-12)

    def test_ninety_degrees_matches_rotated_image(self, rng):
        """测试 90° 投影等于顺时针旋转图像的 0° 投影"""
        img = rng.uniform(0, 1, size=(8, 8))
        at_ninety = project_batch(img[np.newaxis], AngleSet([90.0]), 1.0)[0, 0]
        rotated = project_batch(np.rot90(img, k=-1)[np.newaxis], AngleSet([0.0]), 1.0)
        assert np.allclose(at_ninety, rotated[0, 0], atol=1e-12)

    @pytest.mark.parametrize("theta", [45.0, 135.0, 30.0])
    def test_oblique_against_dense_integral(self, rng, theta):
        """测试斜角投影与密集采样的参考线积分一致"""
        img = rng.uniform(0, 1, size=(8, 8))
        pitch = 1.0
        sino = forward_project(ImageGrid(img, pitch), AngleSet([theta]))
        expected = dense_line_integral(img, theta, pitch)
        assert np.allclose(sino.values[0], expected, atol=1e-3 * pitch * 8)

    def test_linearity(self, rng):
        """测试投影的线性"""
        f = rng.normal(size=(8, 8))
        g = rng.normal(size=(8, 8))
        angles = AngleSet.from_preset("four_view")
        combined = project_batch((2.5 * f - 0.75 * g)[np.newaxis], angles, 5.0)
        first = project_batch(f[np.newaxis], angles, 5.0)
        second = project_batch(g[np.newaxis], angles, 5.0)
        separate = 2.5 * first - 0.75 * second
        assert np.allclose(combined, separate, atol=1e-10)

    def test_mass_preserved_on_axis_views(self, rng):
        """测试轴向视角下各单元之和等于图像总量乘以间距"""
        img = rng.uniform(0, 1, size=(10, 10))
        sino = forward_project(ImageGrid(img, 3.0), AngleSet([0.0, 90.0]))
        for row in sino.values:
            assert row.sum() == pytest.approx(img.sum() * 3.0, rel=1e-12)

    def test_mass_preserved_for_smooth_object(self):
        """测试位于中心的平滑物体在斜角下总量近似守恒"""
        n = 32
        c = (n - 1) / 2.0
        yy, xx = np.mgrid[0:n, 0:n]
        blob = np.exp(-((xx - c) ** 2 + (yy - c) ** 2) / (2 * 3.0**2))
        sino = forward_project(ImageGrid(blob, 1.0), AngleSet.from_preset("four_view"))
        for row in sino.values:
            assert row.sum() == pytest.approx(blob.sum(), rel=1e-3)

    def test_oblique_views_miss_image_corners(self):
        """测试斜角下 n 个探测器单元覆盖不到图像四角，总量不守恒"""
        img = np.ones((8, 8))
        sino = forward_project(ImageGrid(img, 1.0), AngleSet([45.0, 135.0]))
        for row in sino.values:
            assert 0.8 * img.sum() < row.sum() < 0.97 * img.sum()

    def test_batch_matches_single(self, rng):
        """测试批量投影与逐幅投影一致"""
        images = rng.uniform(0, 1, size=(3, 8, 8))
        angles = AngleSet.from_preset("four_view")
        batch = project_batch(images, angles, 5.0)
        for i in range(3):
            single = forward_project(ImageGrid(images[i], 5.0), angles)
            assert np.allclose(batch[i], single.values)

    def test_system_matrix_is_read_only(self):
        """测试缓存的系统矩阵不可写"""
        matrix = system_matrix(4, (0.0, 90.0), 1.0)
        assert matrix.shape == (8, 16)
        with pytest.raises(ValueError):
            matrix[0, 0] = 1.0

    def test_batch_shape_error(self):
        """测试非方形批量输入"""
        with pytest.raises(ShapeError):
            project_batch(np.zeros((2, 4, 5)), AngleSet([0.0]), 1.0)

    def test_domain_is_carried(self):
        """测试强度域随正弦图传递"""
        img = ImageGrid(np.full((4, 4), 40.0), 1.0, IntensityDomain.HOUNSFIELD)
        sino = forward_project(img, AngleSet([0.0]))
        assert sino.domain is IntensityDomain.HOUNSFIELD


class TestFilter:
    """测试斜坡滤波器"""

    def test_ram_lak_dc_is_small(self):
        """测试直流分量接近 0 且为正"""
        response = ram_lak_response(64)
        assert 0.0 < response[0] < 0.01

    def test_ram_lak_nyquist(self):
        """测试奈奎斯特频率处约为 0.5"""
        response = ram_lak_response(64)
        assert response[32] == pytest.approx(0.5, abs=0.01)

    def test_ram_lak_is_real_and_symmetric(self):
        """测试频率响应对称"""
        response = ram_lak_response(16)
        assert np.allclose(response[1:], response[1:][::-1])

    def test_filter_keeps_shape(self, rng):
        """测试滤波后形状不变"""
        values = rng.uniform(size=(4, 10))
        assert filter_projections(values, 5.0).shape == (4, 10)


class TestFbp:
    """测试滤波反投影"""

    def test_zero_sinogram(self):
        """测试全零正弦图重建为全零图像"""
        sino = Sinogram(np.zeros((4, 16)), AngleSet.from_preset("four_view"), 5.0)
        recon = fbp_reconstruct(sino)
        assert recon.n == 16
        assert np.all(recon.values == 0.0)
        assert recon.pitch_mm == 5.0

    def test_normalized_output_is_clipped(self, rng):
        """测试归一化域的重建截断到 [0, 1]"""
        sino = Sinogram(
            rng.uniform(0, 50, size=(2, 16)), AngleSet.from_preset("two_view"), 1.0
        )
        recon = fbp_reconstruct(sino)
        assert recon.values.min() >= 0.0
        assert recon.values.max() <= 1.0

    def test_hounsfield_output_is_not_clipped(self):
        """测试 HU 域的重建不截断"""
        sino = Sinogram(
            np.full((2, 16), 400.0),
            AngleSet.from_preset("two_view"),
            1.0,
            IntensityDomain.HOUNSFIELD,
        )
        recon = fbp_reconstruct(sino)
        assert recon.domain is IntensityDomain.HOUNSFIELD
        assert recon.values.max() > 1.0

    def test_dense_disk_reconstruction(self):
        """测试 180 个视角下圆盘的重建接近原图"""
        img = disk(32, 10.0)
        sino = forward_project(ImageGrid(img, 1.0), AngleSet.uniform(180))
        recon = fbp_reconstruct(sino).values
        inner = disk(32, 6.0).astype(bool)
        outer = ~disk(32, 14.0).astype(bool)
        assert np.abs(recon[inner] - 1.0).mean() < 0.1
        assert np.abs(recon[outer]).mean() < 0.1

    def test_phantom_error_falls_with_views(self):
        """测试椭圆体模的重建误差随视角数翻倍而下降"""
        truth = hu_to_normalized(generate_phantom(PhantomSpec(), seed=0).image)
        errors = []
        for count in (8, 16, 32, 64, 128, 180):
            sino = forward_project(truth, AngleSet.uniform(count))
            errors.append(rmse(fbp_reconstruct(sino), truth))
        for coarse, fine in zip(errors, errors[1:]):
            assert fine <= coarse * 1.02
        assert errors[-1] < 0.5 * errors[0]
        # 180 视角的回归值约 0.033
        assert errors[-1] < 0.05

    def test_pitch_independent(self):
        """测试重建值与像素间距无关"""
        img = disk(16, 5.0)
        angles = AngleSet.uniform(24)
        unit = fbp_reconstruct(forward_project(ImageGrid(img, 1.0), angles))
        scaled = fbp_reconstruct(forward_project(ImageGrid(img, 5.0), angles))
        assert np.allclose(unit.values, scaled.values, atol=1e-10)


class TestNormalize:
    """测试网络输入归一化"""

    def test_full_width_object_maps_to_one(self):
        """测试 64×64 全 1 图像在 0° 的归一化值为 1"""
        img = ImageGrid(np.ones((64, 64)), 5.0)
        sino = forward_project(img, AngleSet([0.0]))
        vector = normalize_sinogram(sino)
        assert np.allclose(vector.data, 1.0)

    @pytest.mark.parametrize("preset,length", [("four_view", 256), ("two_view", 128)])
    def test_vector_length(self, preset, length):
        """测试输入向量长度"""
        img = ImageGrid(np.zeros((64, 64)), 5.0)
        sino = forward_project(img, AngleSet.from_preset(preset))
        assert normalize_sinogram(sino).dims == (length,)

    def test_angle_major_order(self, rng):
        """测试按角度优先展平，与批量版本一致"""
        values = rng.uniform(size=(2, 4, 8))
        batch = normalize_projections(values, 5.0)
        sino = Sinogram(values[1], AngleSet.from_preset("four_view"), 5.0)
        assert np.allclose(batch[1], normalize_sinogram(sino).data)
        assert np.allclose(batch[1][:8], values[1, 0] / 40.0)


if __name__ == "__main__":
    pytest.main([__file__])
