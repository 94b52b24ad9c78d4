"""
带标签图像与数据划分
"""

from __future__ import annotations

from collections.abc import Sequence
from typing import Iterator, Optional, overload

import numpy as np

from ..core.grid import ImageGrid
from ..utils.constants import DEFAULT_PITCH_MM, IntensityDomain, SplitProtocol
from ..utils.errors import ShapeError
from .intensity import hu_array_to_normalized
from .resize import resize_batch


class LabeledImage:
    """
    带标签的图像

    MNIST 记录的标签是数字 0-9；体模记录的标签是体模编号
    """

    def __init__(self, image: ImageGrid, label: int, is_digit: bool = True):
        self.image = image
        self.label = int(label)
        self.is_digit = is_digit

        self._validate()

    def _validate(self) -> None:
        if self.is_digit and not 0 <= self.label <= 9:
            raise ValueError(f"数字标签必须在 [0, 9]: {self.label}")
        if self.label < 0:
            raise ValueError(f"标签不能为负: {self.label}")

    def __repr__(self) -> str:
        kind = "digit" if self.is_digit else "phantom"
        return f"LabeledImage({kind}={self.label}, {self.image!r})"


class ImageCollection(Sequence):
    """
    按数组存储的 LabeledImage 序列

    images 为 N×n×n，labels 为 N；逐项访问时才构造 LabeledImage
    """

    def __init__(
        self,
        images: np.ndarray,
        labels: np.ndarray,
        pitch_mm: float = DEFAULT_PITCH_MM,
        domain: IntensityDomain = IntensityDomain.NORMALIZED,
        is_digit: bool = True,
    ):
        self.images = np.asarray(images, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.pitch_mm = float(pitch_mm)
        self.domain = domain
        self.is_digit = is_digit

        self._validate()

    def _validate(self) -> None:
        if self.images.ndim != 3 or self.images.shape[1] != self.images.shape[2]:
            raise ShapeError(f"图像集合需要 N×n×n 数组: {self.images.shape}")
        if self.labels.shape != (self.images.shape[0],):
            raise ShapeError(
                f"标签数 {self.labels.shape} 与图像数 {self.images.shape[0]} 不一致"
            )
        if self.is_digit and self.labels.size and (
            self.labels.min() < 0 or self.labels.max() > 9
        ):
            raise ValueError("数字标签必须在 [0, 9]")

    @classmethod
    def from_records(cls, records: Sequence[LabeledImage]) -> "ImageCollection":
        """由 LabeledImage 列表构造（所有记录的尺寸、间距、强度域必须一致）"""
        if not records:
            raise ValueError("记录列表为空")
        first = records[0].image
        for record in records:
            if (
                record.image.n != first.n
                or record.image.pitch_mm != first.pitch_mm
                or record.image.domain is not first.domain
            ):
                raise ShapeError(f"记录不一致: {record.image!r} vs {first!r}")
        return cls(
            np.stack([r.image.values for r in records]),
            np.array([r.label for r in records]),
            first.pitch_mm,
            first.domain,
            records[0].is_digit,
        )

    @property
    def n(self) -> int:
        return int(self.images.shape[1])

    def __len__(self) -> int:
        return int(self.images.shape[0])

    @overload
    def __getitem__(self, index: int) -> LabeledImage: ...

    @overload
    def __getitem__(self, index: slice) -> "ImageCollection": ...

    def __getitem__(self, index):  # type: ignore[no-untyped-def]
        if isinstance(index, slice):
            return self.subset(np.arange(len(self))[index])
        image = ImageGrid(self.images[index], self.pitch_mm, self.domain)
        return LabeledImage(image, int(self.labels[index]), self.is_digit)

    def __iter__(self) -> Iterator[LabeledImage]:
        for index in range(len(self)):
            yield self[index]

    def subset(self, indices: np.ndarray) -> "ImageCollection":
        """按索引取子集（保持给定顺序）"""
        indices = np.asarray(indices, dtype=np.int64)
        return ImageCollection(
            self.images[indices],
            self.labels[indices],
            self.pitch_mm,
            self.domain,
            self.is_digit,
        )

    def normalized_targets(self, indices: np.ndarray, size: int) -> np.ndarray:
        """
        训练/评估目标: 归一化域、size×size 的图像批

        HU 图像先做仿射映射；尺寸不同则双线性缩放
        """
        batch = self.images[np.asarray(indices, dtype=np.int64)]
        if self.domain is IntensityDomain.HOUNSFIELD:
            batch = hu_array_to_normalized(batch)
        if batch.shape[1] != size:
            batch = resize_batch(batch, size)
        return batch

    def __repr__(self) -> str:
        return (
            f"ImageCollection(count={len(self)}, n={self.n}, "
            f"domain={self.domain.value})"
        )


class DatasetSplit:
    """
    训练/测试划分

    train 与 test 由同一数据集合的索引定义
    """

    def __init__(
        self,
        data: ImageCollection,
        train_indices: np.ndarray,
        test_indices: np.ndarray,
        protocol: SplitProtocol,
        seed: int = 0,
        excluded_digit: Optional[int] = None,
    ):
        self.data = data
        self.train_indices = np.asarray(train_indices, dtype=np.int64)
        self.test_indices = np.asarray(test_indices, dtype=np.int64)
        self.protocol = protocol
        self.seed = int(seed)
        self.excluded_digit = excluded_digit

        self._validate()

    def _validate(self) -> None:
        if np.intersect1d(self.train_indices, self.test_indices).size:
            raise ValueError("训练集与测试集的索引有重叠")
        if self.protocol is SplitProtocol.EXCLUDE_DIGIT:
            if self.excluded_digit is None:
                raise ValueError("排除数字协议需要 excluded_digit")
            labels = self.data.labels
            if np.any(labels[self.train_indices] == self.excluded_digit):
                raise ValueError(f"训练集中含有被排除的数字 {self.excluded_digit}")
            if np.any(labels[self.test_indices] != self.excluded_digit):
                raise ValueError(f"测试集中含有数字 {self.excluded_digit} 以外的样本")

    @property
    def train(self) -> ImageCollection:
        return self.data.subset(self.train_indices)

    @property
    def test(self) -> ImageCollection:
        return self.data.subset(self.test_indices)

    def describe(self) -> str:
        """协议描述，例如 random 或 exclude_digit(2)"""
        if self.protocol is SplitProtocol.EXCLUDE_DIGIT:
            return f"{self.protocol.value}({self.excluded_digit})"
        return self.protocol.value

    def __repr__(self) -> str:
        return (
            f"DatasetSplit({self.describe()}, train={len(self.train_indices)}, "
            f"test={len(self.test_indices)}, seed={self.seed})"
        )
