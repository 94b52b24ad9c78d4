"""
数据划分协议
随机划分与排除某个数字的划分
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..utils.constants import (
    MNIST_USED_COUNT,
    RANDOM_TEST_COUNT,
    RANDOM_TRAIN_COUNT,
    SplitProtocol,
)
from .records import DatasetSplit, ImageCollection


def _permutation(count: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).permutation(count)


def split_random(data: ImageCollection, seed: int) -> DatasetSplit:
    """
    48000 张图像随机划分为 43000 训练 / 5000 测试

    Raises:
        ValueError: 输入数量不是 48000
    """
    if len(data) != MNIST_USED_COUNT:
        raise ValueError(f"随机划分需要 {MNIST_USED_COUNT} 张图像，实际 {len(data)}")
    return split_random_sized(data, RANDOM_TRAIN_COUNT, RANDOM_TEST_COUNT, seed)


def split_random_sized(
    data: ImageCollection, n_train: int, n_test: int, seed: int
) -> DatasetSplit:
    """
    按给定大小随机划分（桌面规模实验）

    以种子确定的置换为准，前 n_train 个为训练集，随后 n_test 个为测试集
    """
    if n_train < 1 or n_test < 1:
        raise ValueError(f"划分大小必须为正: {n_train}/{n_test}")
    if n_train + n_test > len(data):
        raise ValueError(f"划分大小 {n_train}+{n_test} 超过数据量 {len(data)}")
    order = _permutation(len(data), seed)
    return DatasetSplit(
        data,
        order[:n_train],
        order[n_train : n_train + n_test],
        SplitProtocol.RANDOM,
        seed=seed,
    )


def split_exclude_digit(data: ImageCollection, d: int) -> DatasetSplit:
    """
    排除某个数字: 标签为 d 的图像全部进入测试集，其余进入训练集

    保持原始顺序，不做洗牌
    """
    if not 0 <= d <= 9:
        raise ValueError(f"排除的数字必须在 [0, 9]: {d}")
    mask = data.labels == d
    return DatasetSplit(
        data,
        np.flatnonzero(~mask),
        np.flatnonzero(mask),
        SplitProtocol.EXCLUDE_DIGIT,
        excluded_digit=d,
    )


def subsample_split(
    split: DatasetSplit,
    n_train: Optional[int],
    n_test: Optional[int],
    seed: int,
) -> DatasetSplit:
    """
    从已有划分中按种子抽取子集（用于匹配训练规模）

    None 表示保留全部；抽取后的索引保持升序
    """
    rng = np.random.default_rng(seed)

    def pick(indices: np.ndarray, count: Optional[int]) -> np.ndarray:
        if count is None or count >= len(indices):
            return indices
        if count < 1:
            raise ValueError(f"子集大小必须为正: {count}")
        return np.sort(rng.choice(indices, size=count, replace=False))

    return DatasetSplit(
        split.data,
        pick(split.train_indices, n_train),
        pick(split.test_indices, n_test),
        split.protocol,
        seed=seed,
        excluded_digit=split.excluded_digit,
    )
