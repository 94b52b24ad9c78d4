"""
训练循环
MSE 损失 + RMSProp，按 (seed, epoch) 洗牌，定期写检查点
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import NamedTuple, Optional, Union

import numpy as np

from ..core.grid import AngleSet
from ..core.ops import mse_loss
from ..core.tensor import ComputationTape, Tensor
from ..data.records import DatasetSplit
from ..model.automap import (
    AutomapConfig,
    AutomapParams,
    forward,
    init_params,
    load_params,
    save_params,
)
from ..services.formats import read_loss_log, write_loss_log
from ..ui.console_renderer import ConsoleRenderer
from ..utils.constants import DEFAULT_PITCH_MM, Mode
from ..utils.errors import NumericError, ShapeError
from .optimizer import (
    OptimizerState,
    load_optimizer_state,
    rmsprop_step,
    save_optimizer_state,
)
from .sinogram_cache import SinogramStore, precompute_sinograms
from .train_config import TrainConfig

PathLike = Union[str, os.PathLike]

WEIGHTS_FILE = "weights.amap"
OPTIMIZER_FILE = "optimizer.aopt"
LOSS_LOG_FILE = "loss_log.csv"


class LossRecord(NamedTuple):
    """损失日志中的一行"""

    epoch: int
    step: int
    loss: float


class TrainResult:
    """训练结果: 参数、优化器状态与损失日志"""

    def __init__(
        self,
        params: AutomapParams,
        state: OptimizerState,
        loss_log: list[LossRecord],
    ):
        self.params = params
        self.state = state
        self.loss_log = loss_log

    @property
    def final_loss(self) -> float:
        return self.loss_log[-1].loss if self.loss_log else float("nan")

    def __repr__(self) -> str:
        return (
            f"TrainResult(epochs={self.state.epoch}, steps={len(self.loss_log)}, "
            f"final_loss={self.final_loss:.6g})"
        )


def epoch_batches(
    indices: np.ndarray, batch_size: int, seed: int, epoch: int
) -> list[np.ndarray]:
    """
    一轮的批划分

    以 (seed, epoch) 为种子洗牌；最后一个不完整的批保留，
    若只剩 1 个样本则并入前一批（BN 需要批大小 ≥ 2）
    """
    order = np.random.default_rng([seed, epoch]).permutation(np.asarray(indices))
    starts = range(0, len(order), batch_size)
    batches = [order[start : start + batch_size] for start in starts]
    if len(batches) > 1 and len(batches[-1]) == 1:
        tail = batches.pop()
        batches[-1] = np.concatenate([batches[-1], tail])
    return batches


def batches_per_epoch(count: int, batch_size: int) -> int:
    """每轮的批数（与 epoch_batches 的合并规则一致）"""
    full, rest = divmod(count, batch_size)
    if rest == 1 and full >= 1:
        return full
    return full + (1 if rest else 0)


def train_step(
    params: AutomapParams,
    model_cfg: AutomapConfig,
    inputs: np.ndarray,
    targets: np.ndarray,
    state: OptimizerState,
    cfg: TrainConfig,
) -> float:
    """
    一个训练步: 前向（训练模式）→ MSE → 反向 → RMSProp

    Returns:
        本步的损失值

    Raises:
        NumericError: 损失或梯度出现非有限值（参数不会被更新）
    """
    params.zero_grad()
    with ComputationTape() as tape:
        output = forward(params, model_cfg, Tensor(inputs), Mode.TRAIN)
        loss = mse_loss(output, Tensor(targets[:, np.newaxis]))
    value = loss.item()
    if not np.isfinite(value):
        tape.clear()
        raise NumericError(f"损失出现非有限值: {value}", name="loss")
    tape.backward(loss)
    tape.clear()

    trainable = list(params.trainable())
    grads = {
        name: tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        for name, tensor in trainable
    }
    rmsprop_step(trainable, grads, state, cfg)
    return value


def save_checkpoint(
    directory: PathLike,
    params: AutomapParams,
    state: OptimizerState,
    loss_log: list[LossRecord],
) -> Path:
    """检查点目录: weights.amap、optimizer.aopt、loss_log.csv"""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    save_params(params, root / WEIGHTS_FILE)
    save_optimizer_state(root / OPTIMIZER_FILE, state)
    write_loss_log(root / LOSS_LOG_FILE, [tuple(record) for record in loss_log])
    return root


def load_checkpoint(
    directory: PathLike,
) -> tuple[AutomapParams, OptimizerState, list[LossRecord]]:
    root = Path(directory)
    params = load_params(root / WEIGHTS_FILE)
    state = load_optimizer_state(root / OPTIMIZER_FILE)
    log = [LossRecord(*row) for row in read_loss_log(root / LOSS_LOG_FILE)]
    return params, state, log


def train(
    split: DatasetSplit,
    cfg: TrainConfig,
    model_cfg: AutomapConfig,
    *,
    store: Optional[SinogramStore] = None,
    pitch_mm: float = DEFAULT_PITCH_MM,
    checkpoint_dir: Optional[PathLike] = None,
    resume_from: Optional[PathLike] = None,
    renderer: Optional[ConsoleRenderer] = None,
) -> TrainResult:
    """
    训练 AUTOMAP

    Args:
        split: 数据划分（使用其训练集）
        cfg: 训练配置
        model_cfg: 网络配置
        store: 预计算的输入（None 时现场投影）
        pitch_mm: 像素间距
        checkpoint_dir: 检查点目录（None 表示不写）
        resume_from: 从该检查点目录继续训练
        renderer: 进度输出

    Returns:
        TrainResult

    Raises:
        ShapeError: 训练集太小，或输入长度与网络配置不一致
        NumericError: 训练中出现非有限值（已写出的检查点保留）
    """
    train_indices = split.train_indices
    if len(train_indices) < 2:
        raise ShapeError(f"训练集至少需要 2 个样本: {len(train_indices)}")

    angles = AngleSet.from_preset(cfg.angle_preset)
    if store is None:
        store = precompute_sinograms(split.data, angles, model_cfg.n, pitch_mm)
    if store.row_length != model_cfg.input_len:
        raise ShapeError(
            f"输入长度 {store.row_length} 与网络配置 {model_cfg.input_len} 不一致"
        )
    if len(store) != len(split.data):
        raise ShapeError(f"缓存行数 {len(store)} 与数据量 {len(split.data)} 不一致")

    if resume_from is not None:
        params, state, loss_log = load_checkpoint(resume_from)
        if params.config != model_cfg:
            raise ShapeError(f"检查点配置 {params.config} 与网络配置 {model_cfg} 不一致")
        if renderer:
            renderer.render_info(f"从检查点继续: {resume_from} (已完成 {state.epoch} 轮)")
    else:
        params = init_params(model_cfg, cfg.seed)
        state = OptimizerState.zeros_like(params.trainable())
        loss_log = []
    params.requires_grad(True)

    for epoch in range(state.epoch, cfg.epochs):
        epoch_losses = []
        try:
            batches = epoch_batches(train_indices, cfg.batch_size, cfg.seed, epoch)
            for indices in batches:
                inputs = store.rows(indices)
                targets = split.data.normalized_targets(indices, model_cfg.n)
                loss = train_step(params, model_cfg, inputs, targets, state, cfg)
                loss_log.append(LossRecord(epoch + 1, state.step, loss))
                epoch_losses.append(loss)
        except NumericError as exc:
            if renderer:
                renderer.render_error(f"第 {epoch + 1} 轮数值失败: {exc}")
            raise

        state.epoch = epoch + 1
        if renderer:
            renderer.render_epoch(state.epoch, cfg.epochs, float(np.mean(epoch_losses)))
        if checkpoint_dir is not None and (
            state.epoch % cfg.checkpoint_every == 0 or state.epoch == cfg.epochs
        ):
            save_checkpoint(checkpoint_dir, params, state, loss_log)
            if renderer:
                renderer.render_checkpoint(checkpoint_dir, state.epoch)

    return TrainResult(params, state, loss_log)
