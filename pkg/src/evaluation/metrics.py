"""
评估指标
RMSE（归一化与 HU）、体轮廓 IoU、错误数字率
"""

from __future__ import annotations

from typing import Optional, Sequence, Union

import numpy as np

from ..core.grid import ImageGrid
from ..data.intensity import normalized_to_hu
from ..data.resize import resize_batch
from ..model.oracle import DigitOracle
from ..utils.constants import ORACLE_CLASSES, ORACLE_MIN_ACCURACY, IntensityDomain
from ..utils.errors import DomainError, OracleGateError, ShapeError

# 体轮廓阈值（HU）
BODY_THRESHOLD_HU = -500.0


def rmse_arrays(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise ShapeError(f"RMSE 形状不匹配: {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.sqrt(np.mean(diff * diff)))


def rmse(a: ImageGrid, b: ImageGrid) -> float:
    """
    均方根误差 sqrt(mean((a−b)²))

    Raises:
        DomainError: 两幅图像的强度域不同
        ShapeError: 尺寸不同
    """
    if a.domain is not b.domain:
        raise DomainError(f"RMSE 强度域不一致: {a.domain.value} vs {b.domain.value}")
    return rmse_arrays(a.values, b.values)


def hu_rmse(pred_norm: ImageGrid, truth_hu: ImageGrid) -> float:
    """归一化预测转换为 HU 后与 HU 真值的 RMSE"""
    if truth_hu.domain is not IntensityDomain.HOUNSFIELD:
        raise DomainError(f"hu_rmse 的真值必须是 HU 域: {truth_hu.domain.value}")
    return rmse(normalized_to_hu(pred_norm), truth_hu)


def body_outline_iou(
    pred_hu: ImageGrid, truth_hu: ImageGrid, threshold: float = BODY_THRESHOLD_HU
) -> float:
    """
    体轮廓 IoU: 两幅 HU 图像中 > threshold 的像素集合的交并比

    两者都为空时返回 1.0
    """
    hounsfield = IntensityDomain.HOUNSFIELD
    if pred_hu.domain is not hounsfield or truth_hu.domain is not hounsfield:
        raise DomainError("body_outline_iou 需要两幅 HU 域图像")
    if pred_hu.n != truth_hu.n:
        raise ShapeError(f"IoU 尺寸不匹配: {pred_hu.n} vs {truth_hu.n}")
    pred_mask = pred_hu.values > threshold
    truth_mask = truth_hu.values > threshold
    union = np.count_nonzero(pred_mask | truth_mask)
    if union == 0:
        return 1.0
    return float(np.count_nonzero(pred_mask & truth_mask) / union)


class FalseDigitResult:
    """
    错误数字率结果

    verdicts[i] 为 True 表示第 i 个重建被判为错误数字（或无法识别）
    confusion[真实标签, 预测标签] 为计数
    """

    def __init__(
        self,
        verdicts: np.ndarray,
        predicted: np.ndarray,
        confidence: np.ndarray,
        confusion: np.ndarray,
        oracle_accuracy: float,
    ):
        self.verdicts = verdicts
        self.predicted = predicted
        self.confidence = confidence
        self.confusion = confusion
        self.oracle_accuracy = oracle_accuracy

    @property
    def rate(self) -> float:
        return float(np.mean(self.verdicts)) if self.verdicts.size else 0.0

    @property
    def false_count(self) -> int:
        return int(np.count_nonzero(self.verdicts))

    def __repr__(self) -> str:
        return (
            f"FalseDigitResult(rate={self.rate:.4f}, "
            f"false={self.false_count}/{self.verdicts.size})"
        )


def check_oracle_gate(
    oracle: DigitOracle, min_accuracy: float = ORACLE_MIN_ACCURACY
) -> float:
    """
    检查判别器准确率门槛

    Raises:
        OracleGateError: 未测量或低于门槛
    """
    if oracle.accuracy is None:
        raise OracleGateError("判别器没有记录留出集准确率")
    if oracle.accuracy < min_accuracy:
        raise OracleGateError(
            f"判别器准确率 {oracle.accuracy:.4f} 低于门槛 {min_accuracy:.2f}"
        )
    return oracle.accuracy


def false_digit_rate(
    recons: Union[Sequence[ImageGrid], np.ndarray],
    true_label: Union[int, Sequence[int], np.ndarray],
    oracle: DigitOracle,
    min_accuracy: float = ORACLE_MIN_ACCURACY,
    confidence_threshold: Optional[float] = None,
) -> FalseDigitResult:
    """
    错误数字率

    判别器 top-1 与真实标签不同即为错误；给定 confidence_threshold 时，
    top-1 置信度低于阈值也记为错误（无法识别）。

    Args:
        recons: 归一化域重建图像（ImageGrid 列表或 N×n×n 数组）
        true_label: 单个标签或逐样本标签
        oracle: 数字判别器
        min_accuracy: 判别器准确率门槛
        confidence_threshold: 可选的置信度阈值（默认关闭）

    Raises:
        OracleGateError: 判别器未达到门槛
    """
    accuracy = check_oracle_gate(oracle, min_accuracy)

    if len(recons) == 0:
        raise ValueError("错误数字率需要至少一幅图像")
    if isinstance(recons, np.ndarray):
        images = np.asarray(recons, dtype=np.float64)
    else:
        if any(img.domain is not IntensityDomain.NORMALIZED for img in recons):
            raise DomainError("错误数字率需要归一化域图像")
        images = np.stack([img.values for img in recons])
    if images.ndim != 3:
        raise ShapeError(f"重建图像批形状无效: {images.shape}")

    labels = np.broadcast_to(np.asarray(true_label, dtype=np.int64), (images.shape[0],))
    if images.shape[1] != oracle.side:
        images = resize_batch(images, oracle.side)

    predicted, confidence = oracle.predict(images)
    verdicts = predicted != labels
    if confidence_threshold is not None:
        verdicts = verdicts | (confidence < confidence_threshold)

    confusion = np.zeros((ORACLE_CLASSES, ORACLE_CLASSES), dtype=np.int64)
    np.add.at(confusion, (labels, predicted), 1)
    return FalseDigitResult(verdicts, predicted, confidence, confusion, accuracy)
