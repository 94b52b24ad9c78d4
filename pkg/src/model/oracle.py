"""
数字判别器
4096 → 256 ReLU → 10 的小型分类器，替代人工判断重建图像中的数字
"""

from __future__ import annotations

import os
from typing import Optional, Union

import numpy as np

from ..core.ops import add_bias, matmul, relu_act
from ..core.tensor import Tensor
from ..services.formats import load_tensor_file, save_tensor_file
from ..utils.constants import (
    IMAGE_SIZE,
    MATMUL_ROW_TILE,
    ORACLE_CLASSES,
    ORACLE_HIDDEN,
    ORACLE_MAGIC,
)
from ..utils.errors import FormatError, ShapeError

PathLike = Union[str, os.PathLike]

_TENSOR_NAMES = ("hidden.weight", "hidden.bias", "output.weight", "output.bias")


class DigitOracle:
    """
    数字判别器

    accuracy 为在干净的留出集上测得的 top-1 准确率（未测量时为 None）
    """

    def __init__(self, tensors: dict[str, Tensor], accuracy: Optional[float] = None):
        self.tensors = tensors
        self.accuracy = accuracy

        self._validate()

    def _validate(self) -> None:
        missing = [name for name in _TENSOR_NAMES if name not in self.tensors]
        if missing:
            raise ShapeError(f"判别器缺少参数: {missing}")
        inputs, hidden = self.tensors["hidden.weight"].dims
        if self.tensors["hidden.bias"].dims != (hidden,):
            raise ShapeError("判别器隐藏层偏置形状不一致")
        if self.tensors["output.weight"].dims[0] != hidden:
            raise ShapeError("判别器输出层输入维度不一致")
        classes = self.tensors["output.weight"].dims[1]
        if self.tensors["output.bias"].dims != (classes,):
            raise ShapeError("判别器输出层偏置形状不一致")
        side = int(round(np.sqrt(inputs)))
        if side * side != inputs:
            raise ShapeError(f"判别器输入长度不是平方数: {inputs}")

    @classmethod
    def initialize(
        cls,
        seed: int,
        side: int = IMAGE_SIZE,
        hidden: int = ORACLE_HIDDEN,
        classes: int = ORACLE_CLASSES,
    ) -> "DigitOracle":
        """Glorot 均匀初始化"""
        rng = np.random.default_rng(seed)
        inputs = side * side

        def glorot(fan_in: int, fan_out: int) -> np.ndarray:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            return rng.uniform(-limit, limit, size=(fan_in, fan_out))

        tensors = {
            "hidden.weight": Tensor(glorot(inputs, hidden), name="hidden.weight"),
            "hidden.bias": Tensor(np.zeros(hidden), name="hidden.bias"),
            "output.weight": Tensor(glorot(hidden, classes), name="output.weight"),
            "output.bias": Tensor(np.zeros(classes), name="output.bias"),
        }
        return cls(tensors)

    @property
    def side(self) -> int:
        return int(round(np.sqrt(self.tensors["hidden.weight"].dims[0])))

    def trainable(self) -> list[tuple[str, Tensor]]:
        return [(name, self.tensors[name]) for name in _TENSOR_NAMES]

    def logits(self, x: Tensor) -> Tensor:
        """B×side² 输入 -> B×classes 的 logits"""
        t = self.tensors
        hidden = relu_act(add_bias(matmul(x, t["hidden.weight"]), t["hidden.bias"]))
        return add_bias(matmul(hidden, t["output.weight"]), t["output.bias"])

    def predict(self, images: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """
        分类

        Args:
            images: N×side×side 归一化图像

        Returns:
            (top-1 标签, 对应的 softmax 置信度)
        """
        images = np.asarray(images, dtype=np.float64)
        if images.ndim != 3 or images.shape[1:] != (self.side, self.side):
            raise ShapeError(f"判别器输入应为 N×{self.side}×{self.side}: {images.shape}")
        flat = images.reshape(images.shape[0], -1)
        labels = np.empty(images.shape[0], dtype=np.int64)
        confidence = np.empty(images.shape[0], dtype=np.float64)
        for start in range(0, flat.shape[0], MATMUL_ROW_TILE):
            logits = self.logits(Tensor(flat[start : start + MATMUL_ROW_TILE])).data
            shifted = logits - logits.max(axis=1, keepdims=True)
            probs = np.exp(shifted)
            probs /= probs.sum(axis=1, keepdims=True)
            stop = start + logits.shape[0]
            labels[start:stop] = probs.argmax(axis=1)
            confidence[start:stop] = probs.max(axis=1)
        return labels, confidence

    def score(self, images: np.ndarray, labels: np.ndarray) -> float:
        """top-1 准确率"""
        predicted, _ = self.predict(images)
        return float(np.mean(predicted == np.asarray(labels)))

    def __repr__(self) -> str:
        accuracy = "未测量" if self.accuracy is None else f"{self.accuracy:.4f}"
        return f"DigitOracle(side={self.side}, accuracy={accuracy})"


def save_oracle(oracle: DigitOracle, path: PathLike) -> None:
    """判别器文件: 与权重文件相同的张量容器，魔数 AORC，准确率作为单元素张量保存"""
    arrays = {name: oracle.tensors[name].data for name in _TENSOR_NAMES}
    accuracy = np.nan if oracle.accuracy is None else oracle.accuracy
    arrays["accuracy"] = np.array([accuracy])
    save_tensor_file(path, ORACLE_MAGIC, arrays)


def load_oracle(path: PathLike) -> DigitOracle:
    arrays = load_tensor_file(path, ORACLE_MAGIC)
    if "accuracy" not in arrays or arrays["accuracy"].shape != (1,):
        raise FormatError(f"判别器文件缺少准确率: {path}")
    accuracy = float(arrays.pop("accuracy")[0])
    try:
        tensors = {name: Tensor(arrays[name], name=name) for name in _TENSOR_NAMES}
        return DigitOracle(tensors, None if np.isnan(accuracy) else accuracy)
    except (KeyError, ShapeError) as exc:
        raise FormatError(f"判别器文件内容无效: {path}: {exc}") from exc
