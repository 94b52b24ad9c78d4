"""
有限差分梯度检查
用中心差分验证自动微分得到的梯度
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .tensor import ComputationTape, Tensor


class GradientCheckResult:
    """
    梯度检查结果

    逐元素判定: 绝对误差 ≤ atol 或相对误差 ≤ rtol 即通过，
    因此接近 0 的梯度只按绝对误差比较
    """

    def __init__(self, differences: np.ndarray, scales: np.ndarray):
        self.differences = differences
        self.scales = scales

    @property
    def checked(self) -> int:
        return int(self.differences.size)

    @property
    def max_absolute_error(self) -> float:
        return float(self.differences.max()) if self.checked else 0.0

    @property
    def max_relative_error(self) -> float:
        nonzero = self.scales > 0
        if not nonzero.any():
            return 0.0
        return float((self.differences[nonzero] / self.scales[nonzero]).max())

    def failures(self, rtol: float, atol: float = 1e-8) -> int:
        """两种误差都超限的元素数"""
        within = (self.differences <= atol) | (self.differences <= rtol * self.scales)
        return int(np.count_nonzero(~within))

    def passed(self, rtol: float, atol: float = 1e-8) -> bool:
        return self.failures(rtol, atol) == 0

    def __repr__(self) -> str:
        return (
            f"GradientCheckResult(rel={self.max_relative_error:.3e}, "
            f"abs={self.max_absolute_error:.3e}, checked={self.checked})"
        )


def analytic_gradients(
    loss_fn: Callable[[], Tensor], tensors: Sequence[Tensor]
) -> list[np.ndarray]:
    """在计算带上执行一次前向+反向，返回各张量的梯度"""
    for tensor in tensors:
        tensor.requires_grad = True
        tensor.zero_grad()
    with ComputationTape() as tape:
        loss = loss_fn()
    tape.backward(loss)
    tape.clear()
    return [
        t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for t in tensors
    ]


def numerical_gradient(
    loss_fn: Callable[[], Tensor],
    tensor: Tensor,
    indices: np.ndarray,
    h: float = 1e-5,
) -> np.ndarray:
    """对指定的扁平索引计算中心差分梯度"""
    flat = tensor.data.reshape(-1)
    result = np.empty(len(indices), dtype=np.float64)
    for position, index in enumerate(indices):
        original = flat[index]
        flat[index] = original + h
        plus = loss_fn().item()
        flat[index] = original - h
        minus = loss_fn().item()
        flat[index] = original
        result[position] = (plus - minus) / (2.0 * h)
    return result


def check_gradients(
    loss_fn: Callable[[], Tensor],
    tensors: Sequence[Tensor],
    h: float = 1e-5,
    max_entries: Optional[int] = None,
    seed: int = 0,
) -> GradientCheckResult:
    """
    比较自动微分梯度与中心差分梯度

    Args:
        loss_fn: 读取 tensors 当前数据并返回标量损失的函数
        tensors: 需要检查的叶子张量
        h: 差分步长
        max_entries: 每个张量最多抽查的元素数（None 表示全部）
        seed: 抽样种子

    Returns:
        GradientCheckResult
    """
    analytic = analytic_gradients(loss_fn, tensors)
    rng = np.random.default_rng(seed)

    differences = []
    scales = []
    for tensor, grad in zip(tensors, analytic):
        if max_entries is None or tensor.size <= max_entries:
            indices = np.arange(tensor.size)
        else:
            indices = np.sort(rng.choice(tensor.size, size=max_entries, replace=False))
        numeric = numerical_gradient(loss_fn, tensor, indices, h)
        expected = grad.reshape(-1)[indices]

        differences.append(np.abs(expected - numeric))
        scales.append(np.maximum(np.abs(expected), np.abs(numeric)))

    if not differences:
        return GradientCheckResult(np.empty(0), np.empty(0))
    return GradientCheckResult(np.concatenate(differences), np.concatenate(scales))
