"""
数字判别器训练
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from ..core.ops import softmax_cross_entropy
from ..core.tensor import ComputationTape, Tensor
from ..data.records import ImageCollection
from ..model.oracle import DigitOracle
from ..ui.console_renderer import ConsoleRenderer
from ..utils.constants import IMAGE_SIZE
from ..utils.errors import NumericError
from .optimizer import OptimizerState, rmsprop_step
from .train_config import TrainConfig
from .trainer import epoch_batches


def oracle_train_config(seed: int = 0, epochs: int = 5) -> TrainConfig:
    """判别器的默认训练配置: RMSProp 学习率 1e-3，批大小 64"""
    return TrainConfig(epochs=epochs, learning_rate=1e-3, batch_size=64, seed=seed)


def train_oracle(
    images: ImageCollection,
    cfg: TrainConfig,
    heldout: Optional[ImageCollection] = None,
    side: int = IMAGE_SIZE,
    renderer: Optional[ConsoleRenderer] = None,
) -> DigitOracle:
    """
    训练数字判别器

    输入图像在每个批次中缩放到 side×side；损失为 softmax 交叉熵。
    给定留出集时，把测得的准确率记录在判别器里。

    Args:
        images: 带数字标签的干净图像
        cfg: 训练配置
        heldout: 留出集
        side: 判别器输入边长
        renderer: 进度输出

    Returns:
        训练好的 DigitOracle
    """
    if len(images) < 2:
        raise ValueError(f"判别器训练至少需要 2 个样本: {len(images)}")

    oracle = DigitOracle.initialize(cfg.seed, side=side)
    trainable = oracle.trainable()
    for _, tensor in trainable:
        tensor.requires_grad = True
    state = OptimizerState.zeros_like(trainable)
    all_indices = np.arange(len(images))

    for epoch in range(cfg.epochs):
        losses = []
        for indices in epoch_batches(all_indices, cfg.batch_size, cfg.seed, epoch):
            batch = images.normalized_targets(indices, side).reshape(len(indices), -1)
            for _, tensor in trainable:
                tensor.zero_grad()
            with ComputationTape() as tape:
                logits = oracle.logits(Tensor(batch))
                loss = softmax_cross_entropy(logits, images.labels[indices])
            value = loss.item()
            if not np.isfinite(value):
                raise NumericError(f"判别器损失出现非有限值: {value}", name="loss")
            tape.backward(loss)
            tape.clear()
            grads = {
                name: t.grad if t.grad is not None else np.zeros_like(t.data)
                for name, t in trainable
            }
            rmsprop_step(trainable, grads, state, cfg)
            losses.append(value)
        state.epoch = epoch + 1
        if renderer:
            renderer.render_epoch(state.epoch, cfg.epochs, float(np.mean(losses)))

    for _, tensor in trainable:
        tensor.requires_grad = False
        tensor.zero_grad()

    if heldout is not None and len(heldout):
        targets = heldout.normalized_targets(np.arange(len(heldout)), side)
        oracle.accuracy = oracle.score(targets, heldout.labels)
        if renderer:
            renderer.render_info(f"判别器留出集准确率: {oracle.accuracy:.4f}")
    return oracle
