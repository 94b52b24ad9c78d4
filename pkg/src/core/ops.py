"""
可微分操作
AUTOMAP 所需的全部前向/反向规则
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import BackwardFn, Tensor, current_tape
from ..utils.constants import BN_EPSILON, BN_MOMENTUM, MATMUL_ROW_TILE, Mode
from ..utils.errors import ShapeError


def _record(
    op: str, inputs: tuple[Tensor, ...], data: np.ndarray, backward_fn: BackwardFn
) -> Tensor:
    """创建输出张量，并在需要时记录到激活的计算带"""
    tape = current_tape()
    requires_grad = tape is not None and any(t.requires_grad for t in inputs)
    output = Tensor(data, requires_grad=requires_grad, copy=False)
    if requires_grad and tape is not None:
        tape.record(op, inputs, output, backward_fn)
    return output


def tiled_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    按固定行块计算矩阵乘积

    每个行块都补零到 MATMUL_ROW_TILE 行，保证某一行的结果与同批次的其他行无关。
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    rows = a.shape[0]
    out = np.empty((rows, b.shape[1]), dtype=np.float64)
    for start in range(0, rows, MATMUL_ROW_TILE):
        block = a[start : start + MATMUL_ROW_TILE]
        count = block.shape[0]
        if count < MATMUL_ROW_TILE:
            padded = np.zeros((MATMUL_ROW_TILE, a.shape[1]), dtype=np.float64)
            padded[:count] = block
            block = padded
        out[start : start + count] = (block @ b)[:count]
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    矩阵乘法 c = a · b

    Args:
        a: m×k 张量
        b: k×n 张量

    Returns:
        m×n 张量

    Raises:
        ShapeError: 内维不一致
    """
    if len(a.dims) != 2 or len(b.dims) != 2 or a.dims[1] != b.dims[0]:
        raise ShapeError(f"matmul 形状不匹配: {a.dims} × {b.dims}")

    a_data, b_data = a.data, b.data

    def backward_fn(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return grad @ b_data.T, a_data.T @ grad

    return _record("matmul", (a, b), tiled_matmul(a_data, b_data), backward_fn)


def add_bias(x: Tensor, bias: Tensor) -> Tensor:
    """沿特征轴（第1轴）加偏置，唯一允许的广播"""
    if len(x.dims) < 2 or bias.dims != (x.dims[1],):
        raise ShapeError(f"偏置形状 {bias.dims} 与输入 {x.dims} 的特征轴不一致")

    shape = (1, x.dims[1]) + (1,) * (len(x.dims) - 2)
    reduce_axes = tuple(axis for axis in range(len(x.dims)) if axis != 1)

    def backward_fn(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return grad, grad.sum(axis=reduce_axes)

    out = x.data + bias.data.reshape(shape)
    return _record("add_bias", (x, bias), out, backward_fn)


def add(a: Tensor, b: Tensor) -> Tensor:
    """同形状逐元素相加"""
    if a.dims != b.dims:
        raise ShapeError(f"add 形状不匹配: {a.dims} vs {b.dims}")

    def backward_fn(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return grad, grad

    return _record("add", (a, b), a.data + b.data, backward_fn)


def sum_all(x: Tensor) -> Tensor:
    """全部元素求和，得到标量"""
    dims = x.dims

    def backward_fn(grad: np.ndarray) -> tuple[np.ndarray]:
        return (np.full(dims, float(grad)),)

    return _record("sum_all", (x,), np.array(x.data.sum()), backward_fn)


def _im2col(padded: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """单个样本 (C, H+kh-1, W+kw-1) -> (H*W, C*kh*kw)"""
    windows = sliding_window_view(padded, (kh, kw), axis=(1, 2))
    channels, height, width = windows.shape[:3]
    return windows.transpose(1, 2, 0, 3, 4).reshape(height * width, channels * kh * kw)


def conv2d(x: Tensor, w: Tensor, bias: Tensor) -> Tensor:
    """
    二维互相关，步长 1，零填充 (k-1)/2，输出空间尺寸与输入相同

    Args:
        x: B×C×H×W 输入
        w: F×C×kh×kw 卷积核（kh、kw 必须为奇数）
        bias: F 个偏置

    Returns:
        B×F×H×W 张量
    """
    if len(x.dims) != 4 or len(w.dims) != 4:
        raise ShapeError(f"conv2d 需要4维输入和卷积核: {x.dims}, {w.dims}")
    batch, channels, height, width = x.dims
    filters, w_channels, kh, kw = w.dims
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError(f"卷积核尺寸必须为奇数: {kh}×{kw}")
    if w_channels != channels:
        raise ShapeError(f"conv2d 通道数不匹配: 输入 {x.dims}, 卷积核 {w.dims}")
    if bias.dims != (filters,):
        raise ShapeError(f"conv2d 偏置形状 {bias.dims} 与卷积核数 {filters} 不一致")

    ph, pw = (kh - 1) // 2, (kw - 1) // 2
    padded = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    w_matrix = w.data.reshape(filters, -1)
    bias_data = bias.data

    out = np.empty((batch, filters, height, width), dtype=np.float64)
    for s in range(batch):
        cols = _im2col(padded[s], kh, kw)
        out[s] = (cols @ w_matrix.T).T.reshape(filters, height, width)
    out += bias_data.reshape(1, filters, 1, 1)

    def backward_fn(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        d_padded = np.zeros_like(padded)
        d_w = np.zeros_like(w_matrix)
        for s in range(batch):
            g = grad[s].reshape(filters, height * width)
            cols = _im2col(padded[s], kh, kw)
            d_w += g @ cols
            d_cols = (g.T @ w_matrix).reshape(height, width, channels, kh, kw)
            for a in range(kh):
                for b in range(kw):
                    d_padded[s, :, a : a + height, b : b + width] += d_cols[
                        :, :, :, a, b
                    ].transpose(2, 0, 1)
        d_x = d_padded[:, :, ph : ph + height, pw : pw + width]
        return d_x, d_w.reshape(w.dims), grad.sum(axis=(0, 2, 3))

    return _record("conv2d", (x, w, bias), out, backward_fn)


def tanh_act(x: Tensor) -> Tensor:
    """tanh 激活"""
    out = np.tanh(x.data)

    def backward_fn(grad: np.ndarray) -> tuple[np.ndarray]:
        return (grad * (1.0 - out * out),)

    return _record("tanh", (x,), out, backward_fn)


def relu_act(x: Tensor) -> Tensor:
    """ReLU 激活，x=0 处次梯度取 0"""
    mask = x.data > 0.0
    out = np.where(mask, x.data, 0.0)

    def backward_fn(grad: np.ndarray) -> tuple[np.ndarray]:
        return (grad * mask,)

    return _record("relu", (x,), out, backward_fn)


class RunningStats:
    """
    批归一化运行统计量

    mean 初始化为 0，var 初始化为 1
    """

    def __init__(self, mean: np.ndarray, var: np.ndarray):
        if mean.shape != var.shape or mean.ndim != 1:
            raise ShapeError(f"运行统计量形状无效: {mean.shape}, {var.shape}")
        self.mean = np.array(mean, dtype=np.float64)
        self.var = np.array(var, dtype=np.float64)

    @classmethod
    def fresh(cls, features: int) -> "RunningStats":
        return cls(np.zeros(features), np.ones(features))

    def copy(self) -> "RunningStats":
        return RunningStats(self.mean, self.var)

    def __repr__(self) -> str:
        return f"RunningStats(features={self.mean.shape[0]})"


def _feature_layout(dims: tuple[int, ...]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """返回 (归约轴, 参数广播形状)；全连接按单元归一化，卷积按通道归一化"""
    if len(dims) == 2:
        return (0,), (1, dims[1])
    if len(dims) == 4:
        return (0, 2, 3), (1, dims[1], 1, 1)
    raise ShapeError(f"batchnorm 仅支持2维或4维输入: {dims}")


def batchnorm(
    x: Tensor, gamma: Tensor, beta: Tensor, stats: RunningStats, mode: Mode
) -> Tensor:
    """
    批归一化

    训练模式用批统计量（方差加 ε=1e-5）并以动量 0.99 更新运行统计量；
    评估模式使用运行统计量。

    Raises:
        ShapeError: 参数形状不符，或训练模式下批大小为 1
    """
    axes, shape = _feature_layout(x.dims)
    features = x.dims[1]
    if gamma.dims != (features,) or beta.dims != (features,):
        raise ShapeError(
            f"batchnorm 参数形状 {gamma.dims}/{beta.dims} 与特征数 {features} 不一致"
        )
    if stats.mean.shape != (features,):
        raise ShapeError(f"运行统计量形状 {stats.mean.shape} 与特征数 {features} 不一致")

    gamma_b = gamma.data.reshape(shape)

    if mode is Mode.TRAIN:
        if x.dims[0] < 2:
            raise ShapeError("训练模式下 batchnorm 需要批大小 ≥ 2")
        count = x.size // features
        mean = x.data.mean(axis=axes)
        centered = x.data - mean.reshape(shape)
        var = (centered * centered).mean(axis=axes)
        inv_std = 1.0 / np.sqrt(var + BN_EPSILON)
        x_hat = centered * inv_std.reshape(shape)

        stats.mean = BN_MOMENTUM * stats.mean + (1.0 - BN_MOMENTUM) * mean
        stats.var = BN_MOMENTUM * stats.var + (1.0 - BN_MOMENTUM) * var

        def backward_fn(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
            d_hat = grad * gamma_b
            sum_d_hat = d_hat.sum(axis=axes, keepdims=True)
            sum_d_hat_x = (d_hat * x_hat).sum(axis=axes, keepdims=True)
            d_x = (inv_std.reshape(shape) / count) * (
                count * d_hat - sum_d_hat - x_hat * sum_d_hat_x
            )
            return d_x, (grad * x_hat).sum(axis=axes), grad.sum(axis=axes)

    else:
        inv_std = 1.0 / np.sqrt(stats.var + BN_EPSILON)
        x_hat = (x.data - stats.mean.reshape(shape)) * inv_std.reshape(shape)

        def backward_fn(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
            d_x = grad * gamma_b * inv_std.reshape(shape)
            return d_x, (grad * x_hat).sum(axis=axes), grad.sum(axis=axes)

    out = gamma_b * x_hat + beta.data.reshape(shape)
    return _record("batchnorm", (x, gamma, beta), out, backward_fn)


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    """均方误差损失，返回标量"""
    if pred.dims != target.dims:
        raise ShapeError(f"mse_loss 形状不匹配: {pred.dims} vs {target.dims}")

    diff = pred.data - target.data
    count = diff.size

    def backward_fn(grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d_pred = grad * 2.0 * diff / count
        return d_pred, -d_pred

    loss = np.array(np.mean(diff * diff))
    return _record("mse_loss", (pred, target), loss, backward_fn)


def softmax_cross_entropy(logits: Tensor, labels: Sequence[int] | np.ndarray) -> Tensor:
    """
    Softmax 交叉熵（批平均）

    Args:
        logits: B×K 张量
        labels: 长度为 B 的类别索引
    """
    label_array = np.asarray(labels, dtype=np.int64)
    if len(logits.dims) != 2 or label_array.shape != (logits.dims[0],):
        raise ShapeError(f"标签形状 {label_array.shape} 与 logits {logits.dims} 不一致")
    batch, classes = logits.dims
    if label_array.min() < 0 or label_array.max() >= classes:
        raise ValueError(f"标签超出范围 [0, {classes})")

    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    rows = np.arange(batch)
    loss = -log_probs[rows, label_array].mean()

    def backward_fn(grad: np.ndarray) -> tuple[np.ndarray]:
        d_logits = np.exp(log_probs)
        d_logits[rows, label_array] -= 1.0
        return (grad * d_logits / batch,)

    return _record("softmax_cross_entropy", (logits,), np.array(loss), backward_fn)


def reshape(x: Tensor, new_dims: Sequence[int]) -> Tensor:
    """改变形状，数据不变"""
    target = tuple(int(d) for d in new_dims)
    if int(np.prod(target)) != x.size or any(d <= 0 for d in target):
        raise ShapeError(f"reshape 元素数不一致: {x.dims} -> {target}")
    dims = x.dims

    def backward_fn(grad: np.ndarray) -> tuple[np.ndarray]:
        return (grad.reshape(dims),)

    return _record("reshape", (x,), x.data.reshape(target), backward_fn)
