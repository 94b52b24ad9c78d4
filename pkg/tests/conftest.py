"""
测试共用的合成数据
"""

import gzip
import os
import struct
from pathlib import Path

import numpy as np
import pytest

from src.data.mnist import find_mnist_files
from src.data.records import ImageCollection


def write_idx_images(path: Path, images: np.ndarray, compress: bool = False) -> Path:
    """写出 IDX3 图像文件（uint8，N×h×w）"""
    count, rows, cols = images.shape
    data = struct.pack(">IIII", 0x00000803, count, rows, cols) + images.astype(
        np.uint8
    ).tobytes()
    if compress:
        data = gzip.compress(data)
    path.write_bytes(data)
    return path


def write_idx_labels(path: Path, labels: np.ndarray, compress: bool = False) -> Path:
    """写出 IDX1 标签文件"""
    data = struct.pack(">II", 0x00000801, len(labels)) + np.asarray(
        labels, dtype=np.uint8
    ).tobytes()
    if compress:
        data = gzip.compress(data)
    path.write_bytes(data)
    return path


def digit_images(
    count: int, seed: int = 0, side: int = 28
) -> tuple[np.ndarray, np.ndarray]:
    """
    合成的“数字”图像: 每个类别一个固定的方块位置，加少量噪声

    标签按 0..9 循环
    """
    rng = np.random.default_rng(seed)
    labels = np.arange(count) % 10
    images = np.zeros((count, side, side), dtype=np.uint8)
    block = side // 4
    for i, label in enumerate(labels):
        row = (label // 5) * (side // 2) + 2
        col = (label % 5) * (side // 5) + 1
        images[i, row : row + block, col : col + block] = 255
        noise = rng.integers(0, 20, size=(side, side))
        images[i] = np.maximum(images[i], noise.astype(np.uint8))
    return images, labels


@pytest.fixture
def mnist_dir(tmp_path: Path) -> Path:
    """含训练集（60 张）与 t10k（20 张）的 MNIST 格式目录"""
    root = tmp_path / "mnist"
    root.mkdir()
    images, labels = digit_images(60, seed=1)
    write_idx_images(root / "train-images-idx3-ubyte", images)
    write_idx_labels(root / "train-labels-idx1-ubyte", labels)
    test_images, test_labels = digit_images(20, seed=2)
    write_idx_images(root / "t10k-images-idx3-ubyte", test_images)
    write_idx_labels(root / "t10k-labels-idx1-ubyte", test_labels)
    return root


@pytest.fixture
def small_digits() -> ImageCollection:
    """40 张 28×28 的合成数字图像（归一化域）"""
    images, labels = digit_images(40, seed=3)
    return ImageCollection(images.astype(np.float64) / 255.0, labels, pitch_mm=1.0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def real_mnist_dir() -> Path:
    """AUTOMAP_DATA_DIR 指向的真实 MNIST 目录，缺少文件时跳过"""
    data_dir = os.getenv("AUTOMAP_DATA_DIR")
    if not data_dir:
        pytest.skip("未设置 AUTOMAP_DATA_DIR")
    try:
        find_mnist_files(data_dir, "train")
    except FileNotFoundError:
        pytest.skip(f"{data_dir} 中没有 MNIST 训练文件")
    return Path(data_dir)
