"""
MNIST IDX 文件读取
支持原始文件与 .gz 压缩文件
"""

from __future__ import annotations

import gzip
import os
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..utils.constants import IDX_IMAGE_MAGIC, IDX_LABEL_MAGIC
from ..utils.errors import FormatError
from .records import ImageCollection

PathLike = Union[str, os.PathLike]

# 标准文件名前缀
MNIST_PREFIXES = {
    "train": ("train-images", "train-labels"),
    "t10k": ("t10k-images", "t10k-labels"),
}


def _read_raw(path: PathLike) -> bytes:
    target = Path(path)
    if not target.is_file():
        raise FileNotFoundError(f"MNIST 文件不存在: {target}")
    data = target.read_bytes()
    if data[:2] == b"\x1f\x8b":
        try:
            return gzip.decompress(data)
        except (OSError, EOFError) as exc:
            raise FormatError(f"gzip 解压失败: {target}: {exc}") from exc
    return data


def _read_header(data: bytes, fields: int, source: PathLike) -> tuple[int, ...]:
    size = 4 * fields
    if len(data) < size:
        raise FormatError(f"IDX 头部被截断: {source}")
    return struct.unpack(f">{fields}I", data[:size])


def read_idx_images(path: PathLike) -> np.ndarray:
    """
    读取 IDX 图像文件

    格式: 大端 u32 魔数 0x00000803、数量、行数、列数，然后逐行的无符号字节

    Returns:
        count×rows×cols 的 uint8 数组

    Raises:
        FormatError: 魔数错误或文件被截断
    """
    data = _read_raw(path)
    magic, count, rows, cols = _read_header(data, 4, path)
    if magic != IDX_IMAGE_MAGIC:
        raise FormatError(f"IDX 图像魔数错误: {path} (0x{magic:08x})")
    expected = count * rows * cols
    body = data[16:]
    if len(body) < expected:
        raise FormatError(f"IDX 图像文件被截断: {path} (需要 {expected} 字节, 实际 {len(body)})")
    return np.frombuffer(body[:expected], dtype=np.uint8).reshape(count, rows, cols)


def read_idx_labels(path: PathLike) -> np.ndarray:
    """
    读取 IDX 标签文件

    格式: 大端 u32 魔数 0x00000801、数量，然后每个标签一个字节
    """
    data = _read_raw(path)
    magic, count = _read_header(data, 2, path)
    if magic != IDX_LABEL_MAGIC:
        raise FormatError(f"IDX 标签魔数错误: {path} (0x{magic:08x})")
    body = data[8:]
    if len(body) < count:
        raise FormatError(f"IDX 标签文件被截断: {path} (需要 {count} 字节, 实际 {len(body)})")
    labels = np.frombuffer(body[:count], dtype=np.uint8)
    if labels.size and labels.max() > 9:
        raise FormatError(f"IDX 标签超出 0-9: {path}")
    return labels


def load_mnist_arrays(
    images_path: PathLike, labels_path: PathLike, limit: Optional[int] = None
) -> tuple[np.ndarray, np.ndarray]:
    """
    读取并配对图像与标签

    Args:
        images_path: 图像文件
        labels_path: 标签文件
        limit: 只取前 limit 条

    Returns:
        (N×28×28 归一化 float64 图像, N 个标签)

    Raises:
        FormatError: 图像与标签数量不一致
    """
    raw_images = read_idx_images(images_path)
    raw_labels = read_idx_labels(labels_path)
    if raw_images.shape[0] != raw_labels.shape[0]:
        raise FormatError(
            f"图像数 {raw_images.shape[0]} 与标签数 {raw_labels.shape[0]} 不一致: "
            f"{images_path}, {labels_path}"
        )
    if limit is not None:
        raw_images = raw_images[:limit]
        raw_labels = raw_labels[:limit]
    images = raw_images.astype(np.float64) / 255.0
    return images, raw_labels.astype(np.int64)


def load_mnist(
    images_path: PathLike, labels_path: PathLike, limit: Optional[int] = None
) -> ImageCollection:
    """
    读取 MNIST 为带标签图像序列（28×28，归一化域）

    像素字节除以 255，间距按原始像素记为 1 mm（缩放后再赋予 5 mm）
    """
    images, labels = load_mnist_arrays(images_path, labels_path, limit)
    if images.shape[1] != images.shape[2]:
        raise FormatError(f"MNIST 图像不是方形: {images.shape[1:]}")
    return ImageCollection(images, labels, pitch_mm=1.0)


def find_mnist_files(data_dir: PathLike, kind: str = "train") -> tuple[Path, Path]:
    """
    在目录中查找 MNIST 文件

    接受 train-images-idx3-ubyte / train-images.idx3-ubyte 及其 .gz 版本

    Args:
        data_dir: 数据目录
        kind: train 或 t10k

    Returns:
        (图像文件, 标签文件)
    """
    if kind not in MNIST_PREFIXES:
        raise ValueError(f"未知的 MNIST 文件类型: {kind}")
    root = Path(data_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"MNIST 目录不存在: {root}")

    found = []
    for prefix, suffix in zip(MNIST_PREFIXES[kind], ("idx3-ubyte", "idx1-ubyte")):
        candidates = [
            root / f"{prefix}-{suffix}",
            root / f"{prefix}.{suffix}",
            root / f"{prefix}-{suffix}.gz",
            root / f"{prefix}.{suffix}.gz",
        ]
        match = next((c for c in candidates if c.is_file()), None)
        if match is None:
            raise FileNotFoundError(f"在 {root} 中找不到 {prefix}-{suffix}[.gz]")
        found.append(match)
    return found[0], found[1]
