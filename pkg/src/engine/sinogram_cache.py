"""
正弦图预计算缓存
每张图像的归一化网络输入向量只投影一次
"""

from __future__ import annotations

import hashlib
import os
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..core.grid import AngleSet
from ..data.records import ImageCollection
from ..geometry.radon import normalize_projections, project_batch

PathLike = Union[str, os.PathLike]

_CHUNK = 512


def geometry_key(angles: AngleSet, n: int, pitch_mm: float) -> str:
    """(角度集合, n, 间距) 的内容哈希"""
    text = f"angles={angles.key()};n={n};pitch={float(pitch_mm)!r}"
    return hashlib.sha1(text.encode("utf-8")).hexdigest()


def collection_fingerprint(images: ImageCollection) -> str:
    """图像数据的内容哈希（像素、强度域、间距）"""
    digest = hashlib.sha1()
    header = f"{images.domain.value};{images.pitch_mm!r};{images.images.shape}"
    digest.update(header.encode())
    digest.update(np.ascontiguousarray(images.images).tobytes())
    return digest.hexdigest()


class SinogramStore:
    """
    预计算的网络输入

    vectors 第 i 行对应图像集合中的第 i 张图像
    """

    def __init__(self, vectors: np.ndarray, key: str, fingerprint: str):
        self.vectors = np.asarray(vectors, dtype=np.float64)
        self.key = key
        self.fingerprint = fingerprint

        if self.vectors.ndim != 2:
            raise ValueError(f"缓存向量必须为二维: {self.vectors.shape}")

    @property
    def row_length(self) -> int:
        return int(self.vectors.shape[1])

    def rows(self, indices: np.ndarray) -> np.ndarray:
        return self.vectors[np.asarray(indices, dtype=np.int64)]

    def __len__(self) -> int:
        return int(self.vectors.shape[0])

    def save(self, path: PathLike) -> None:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp = target.with_name(target.name + ".tmp.npz")
        np.savez(tmp, vectors=self.vectors, key=self.key, fingerprint=self.fingerprint)
        os.replace(tmp, target)

    @classmethod
    def load(cls, path: PathLike) -> "SinogramStore":
        with np.load(path, allow_pickle=False) as archive:
            return cls(
                archive["vectors"], str(archive["key"]), str(archive["fingerprint"])
            )

    def __repr__(self) -> str:
        return f"SinogramStore(rows={len(self)}, row_length={self.row_length})"


def compute_vectors(
    images: ImageCollection, angles: AngleSet, n: int, pitch_mm: float
) -> np.ndarray:
    """逐块把图像转为归一化目标、投影并归一化"""
    vectors = np.empty((len(images), len(angles) * n), dtype=np.float64)
    for start in range(0, len(images), _CHUNK):
        indices = np.arange(start, min(start + _CHUNK, len(images)))
        targets = images.normalized_targets(indices, n)
        projections = project_batch(targets, angles, pitch_mm)
        vectors[indices] = normalize_projections(projections, pitch_mm)
    return vectors


def precompute_sinograms(
    images: ImageCollection,
    angles: AngleSet,
    n: int,
    pitch_mm: float,
    cache_path: Optional[PathLike] = None,
) -> SinogramStore:
    """
    预计算（或从缓存读取）全部图像的网络输入

    缓存文件的几何哈希或数据哈希与当前不一致时重新计算并覆盖

    Args:
        images: 图像集合
        angles: 投影角度
        n: 目标图像边长
        pitch_mm: 像素间距
        cache_path: 可选的 .npz 缓存文件
    """
    key = geometry_key(angles, n, pitch_mm)
    fingerprint = collection_fingerprint(images)

    if cache_path is not None and Path(cache_path).is_file():
        try:
            cached = SinogramStore.load(cache_path)
        except (OSError, ValueError, KeyError):
            cached = None
        if (
            cached is not None
            and cached.key == key
            and cached.fingerprint == fingerprint
            and len(cached) == len(images)
        ):
            return cached

    vectors = compute_vectors(images, angles, n, pitch_mm)
    store = SinogramStore(vectors, key, fingerprint)
    if cache_path is not None:
        store.save(cache_path)
    return store
