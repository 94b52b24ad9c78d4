"""
张量与计算带
反向模式自动微分的最小实现
"""

from __future__ import annotations

from contextvars import ContextVar, Token
from typing import Callable, Optional, Sequence

import numpy as np

from ..utils.errors import ShapeError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """
    张量类

    64位浮点 n 维数组，带可选的梯度槽
    """

    def __init__(
        self,
        data: object,
        requires_grad: bool = False,
        name: Optional[str] = None,
        copy: bool = True,
    ):
        """
        初始化张量

        Args:
            data: 数值数据（会被转换为 float64）
            requires_grad: 是否需要梯度
            name: 可选名称，用于错误信息
            copy: 是否复制输入数组
        """
        if copy:
            array = np.array(data, dtype=np.float64)
        else:
            array = np.asarray(data, dtype=np.float64)
        if any(extent <= 0 for extent in array.shape):
            raise ShapeError(f"张量维度必须为正: {array.shape}")

        self.data: np.ndarray = array
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self._tape: Optional[ComputationTape] = None

    @property
    def dims(self) -> tuple[int, ...]:
        """维度元组"""
        return tuple(self.data.shape)

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        """返回标量值"""
        if self.data.size != 1:
            raise ShapeError(f"只有单元素张量可以转换为标量: {self.dims}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, grad: np.ndarray) -> None:
        """累加梯度（扇出时梯度相加）"""
        if grad.shape != self.data.shape:
            raise ShapeError(f"梯度形状 {grad.shape} 与张量形状 {self.dims} 不一致")
        if self.grad is None:
            self.grad = np.array(grad, dtype=np.float64, copy=True)
        else:
            self.grad = self.grad + grad

    def __repr__(self) -> str:
        label = f", name={self.name}" if self.name else ""
        return f"Tensor(dims={self.dims}, requires_grad={self.requires_grad}{label})"


class TapeNode:
    """计算带上记录的一个操作"""

    def __init__(
        self,
        op: str,
        inputs: tuple[Tensor, ...],
        output: Tensor,
        backward_fn: BackwardFn,
    ):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn

    def __repr__(self) -> str:
        return f"TapeNode(op={self.op}, output={self.output.dims})"


_active_tape: ContextVar[Optional["ComputationTape"]] = ContextVar(
    "active_tape", default=None
)


def current_tape() -> Optional["ComputationTape"]:
    """当前线程上下文中激活的计算带"""
    return _active_tape.get()


class ComputationTape:
    """
    计算带

    按记录顺序保存操作；反向传播严格按逆序回放。
    只在 with 块内记录，块外（推理）不产生任何节点。
    """

    def __init__(self) -> None:
        self.nodes: list[TapeNode] = []
        self._token: Optional[Token] = None

    def __enter__(self) -> "ComputationTape":
        if self._token is not None:
            raise RuntimeError("计算带已经处于激活状态")
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, *exc_info: object) -> None:
        if self._token is not None:
            _active_tape.reset(self._token)
            self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def record(
        self,
        op: str,
        inputs: tuple[Tensor, ...],
        output: Tensor,
        backward_fn: BackwardFn,
    ) -> None:
        """记录一个操作"""
        self.nodes.append(TapeNode(op, inputs, output, backward_fn))
        output._tape = self

    def backward(self, loss: Tensor) -> None:
        """
        从标量损失开始反向传播

        Args:
            loss: 标量损失张量

        Raises:
            ShapeError: 损失不是标量
            RuntimeError: 计算带为空
        """
        if loss.size != 1:
            raise ShapeError(f"反向传播需要标量损失，实际形状: {loss.dims}")
        if not self.nodes:
            raise RuntimeError("计算带为空，无法反向传播")

        loss.grad = np.ones_like(loss.data)
        for node in reversed(self.nodes):
            upstream = node.output.grad
            if upstream is None:
                continue
            input_grads = node.backward_fn(upstream)
            for tensor, grad in zip(node.inputs, input_grads):
                if grad is not None and tensor.requires_grad:
                    tensor.accumulate_grad(grad)

    def clear(self) -> None:
        """清空计算带（每个训练步之间调用）"""
        for node in self.nodes:
            node.output._tape = None
        self.nodes.clear()


def backward(loss: Tensor) -> None:
    """对记录了该损失的计算带执行反向传播"""
    if loss._tape is None:
        raise RuntimeError("损失未在计算带上记录")
    loss._tape.backward(loss)
