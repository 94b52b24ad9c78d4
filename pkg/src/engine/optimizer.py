"""
RMSProp 优化器
"""

from __future__ import annotations

import os
from typing import Iterable, Mapping, Protocol, Sequence, Union

import numpy as np

from ..core.tensor import Tensor
from ..services.formats import load_tensor_file, save_tensor_file
from ..utils.constants import OPTIMIZER_MAGIC
from ..utils.errors import FormatError, NumericError, ShapeError

PathLike = Union[str, os.PathLike]

_EPOCH_KEY = "state.epoch"
_STEP_KEY = "state.step"


class RMSPropSettings(Protocol):
    learning_rate: float
    rmsprop_rho: float
    rmsprop_eps: float


class OptimizerState:
    """
    优化器状态

    每个参数一个平方梯度累加器 v（与参数同形状，逐元素 ≥ 0），
    以及已完成的轮数和步数
    """

    def __init__(
        self, accumulators: dict[str, np.ndarray], epoch: int = 0, step: int = 0
    ):
        self.accumulators = accumulators
        self.epoch = int(epoch)
        self.step = int(step)

        self._validate()

    def _validate(self) -> None:
        for name, v in self.accumulators.items():
            if np.any(v < 0) or not np.all(np.isfinite(v)):
                raise ValueError(f"累加器 {name} 含有负值或非有限值")
        if self.epoch < 0 or self.step < 0:
            raise ValueError(f"轮数/步数不能为负: {self.epoch}/{self.step}")

    @classmethod
    def zeros_like(cls, params: Iterable[tuple[str, Tensor]]) -> "OptimizerState":
        return cls({name: np.zeros_like(tensor.data) for name, tensor in params})

    def copy(self) -> "OptimizerState":
        accumulators = {name: v.copy() for name, v in self.accumulators.items()}
        return OptimizerState(accumulators, self.epoch, self.step)

    def __repr__(self) -> str:
        return (
            f"OptimizerState(parameters={len(self.accumulators)}, "
            f"epoch={self.epoch}, step={self.step})"
        )


def rmsprop_step(
    params: Sequence[tuple[str, Tensor]],
    grads: Mapping[str, np.ndarray],
    state: OptimizerState,
    cfg: RMSPropSettings,
) -> tuple[Sequence[tuple[str, Tensor]], OptimizerState]:
    """
    RMSProp 更新

    v ← ρ·v + (1−ρ)·g²；θ ← θ − lr·g/(√v + ε)

    更新前先检查全部梯度，任何一个不合法则整步放弃，参数与状态都不变。

    Raises:
        ShapeError: 梯度或累加器形状与参数不一致
        NumericError: 梯度含 NaN/Inf（指明参数名）
    """
    for name, tensor in params:
        if name not in grads:
            raise ShapeError(f"缺少参数 {name} 的梯度")
        if grads[name].shape != tensor.data.shape:
            raise ShapeError(f"{name} 梯度形状 {grads[name].shape} 与参数 {tensor.dims} 不一致")
        if name not in state.accumulators:
            raise ShapeError(f"优化器状态缺少参数 {name}")
        if state.accumulators[name].shape != tensor.data.shape:
            raise ShapeError(
                f"{name} 累加器形状 {state.accumulators[name].shape} 与参数 {tensor.dims} 不一致"
            )
        if not np.all(np.isfinite(grads[name])):
            raise NumericError(f"参数 {name} 的梯度含有非有限值", name=name)

    rho, lr, eps = cfg.rmsprop_rho, cfg.learning_rate, cfg.rmsprop_eps
    for name, tensor in params:
        g = grads[name]
        v = rho * state.accumulators[name] + (1.0 - rho) * (g * g)
        state.accumulators[name] = v
        tensor.data = tensor.data - lr * g / (np.sqrt(v) + eps)
    state.step += 1
    return params, state


def save_optimizer_state(path: PathLike, state: OptimizerState) -> None:
    """优化器状态文件: 与权重文件相同的张量容器，魔数 AOPT"""
    arrays = dict(state.accumulators)
    arrays[_EPOCH_KEY] = np.array([float(state.epoch)])
    arrays[_STEP_KEY] = np.array([float(state.step)])
    save_tensor_file(path, OPTIMIZER_MAGIC, arrays)


def load_optimizer_state(path: PathLike) -> OptimizerState:
    arrays = load_tensor_file(path, OPTIMIZER_MAGIC)
    try:
        epoch = int(arrays.pop(_EPOCH_KEY)[0])
        step = int(arrays.pop(_STEP_KEY)[0])
    except KeyError as exc:
        raise FormatError(f"优化器状态文件缺少 {exc}: {path}") from exc
    try:
        return OptimizerState(arrays, epoch, step)
    except ValueError as exc:
        raise FormatError(f"优化器状态无效: {path}: {exc}") from exc
