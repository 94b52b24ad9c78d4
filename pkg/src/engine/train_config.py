"""
训练配置
"""

from __future__ import annotations

from typing import Any, Union

from ..utils.constants import AnglePreset


class TrainConfig:
    """
    训练配置类

    默认值: 50 轮，RMSProp 学习率 2e-5（ρ=0.9，ε=1e-8），批大小 64
    """

    def __init__(
        self,
        epochs: int = 50,
        learning_rate: float = 2e-5,
        rmsprop_rho: float = 0.9,
        rmsprop_eps: float = 1e-8,
        batch_size: int = 64,
        seed: int = 0,
        checkpoint_every: int = 5,
        angle_preset: Union[AnglePreset, str] = AnglePreset.FOUR_VIEW,
    ):
        """
        初始化训练配置

        Args:
            epochs: 训练轮数
            learning_rate: 学习率
            rmsprop_rho: 平方梯度滑动平均系数
            rmsprop_eps: 分母中的 ε
            batch_size: 批大小（≥ 2，BN 需要）
            seed: 随机种子（初始化与每轮洗牌）
            checkpoint_every: 每隔多少轮写一次检查点
            angle_preset: 投影角度预设
        """
        self.epochs = int(epochs)
        self.learning_rate = float(learning_rate)
        self.rmsprop_rho = float(rmsprop_rho)
        self.rmsprop_eps = float(rmsprop_eps)
        self.batch_size = int(batch_size)
        self.seed = int(seed)
        self.checkpoint_every = int(checkpoint_every)
        try:
            self.angle_preset = AnglePreset(angle_preset)
        except ValueError:
            raise ValueError(f"未知的角度预设: {angle_preset}") from None

        self._validate()

    def _validate(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"训练轮数必须 ≥ 1: {self.epochs}")
        if not self.learning_rate > 0:
            raise ValueError(f"学习率必须为正: {self.learning_rate}")
        if not 0.0 <= self.rmsprop_rho < 1.0:
            raise ValueError(f"rmsprop_rho 必须在 [0, 1): {self.rmsprop_rho}")
        if not self.rmsprop_eps > 0:
            raise ValueError(f"rmsprop_eps 必须为正: {self.rmsprop_eps}")
        if self.batch_size < 2:
            raise ValueError(f"批大小必须 ≥ 2: {self.batch_size}")
        if self.seed < 0 or self.seed >= 2**64:
            raise ValueError(f"种子必须是 64 位无符号整数: {self.seed}")
        if self.checkpoint_every < 1:
            raise ValueError(f"检查点间隔必须 ≥ 1: {self.checkpoint_every}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "rmsprop_rho": self.rmsprop_rho,
            "rmsprop_eps": self.rmsprop_eps,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "checkpoint_every": self.checkpoint_every,
            "angle_preset": self.angle_preset.value,
        }

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TrainConfig) and self.to_dict() == other.to_dict()

    def __repr__(self) -> str:
        return (
            f"TrainConfig(epochs={self.epochs}, lr={self.learning_rate}, "
            f"batch_size={self.batch_size}, seed={self.seed}, "
            f"angles={self.angle_preset.value})"
        )
