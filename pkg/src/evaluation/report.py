"""
评估报告
每行一个 key = value，列表用逗号分隔
"""

from __future__ import annotations

import os
from typing import Any, Callable, Optional, Sequence, Union

import numpy as np

from ..services.formats import format_key_values, parse_key_values, write_key_values

PathLike = Union[str, os.PathLike]

_PER_SAMPLE_FIELDS = (
    "false_digit_verdicts",
    "hu_rmse_per_sample",
    "body_iou_per_sample",
)


def _optional_list(
    values: Optional[Sequence[Any]], convert: Callable[[Any], Any]
) -> Optional[list]:
    return None if values is None else [convert(v) for v in values]


class EvalReport:
    """
    单次运行的评估报告

    rmse_mean 等于 rmse_per_sample 的平均值；比率都在 [0, 1]
    """

    def __init__(
        self,
        run_id: str,
        rmse_per_sample: Sequence[float],
        fbp_rmse_per_sample: Sequence[float],
        false_digit_rate: Optional[float] = None,
        false_digit_verdicts: Optional[Sequence[bool]] = None,
        oracle_accuracy: Optional[float] = None,
        confusion: Optional[np.ndarray] = None,
        hu_rmse_per_sample: Optional[Sequence[float]] = None,
        body_iou_per_sample: Optional[Sequence[float]] = None,
        config_echo: Optional[dict[str, Any]] = None,
    ):
        self.run_id = run_id
        self.rmse_per_sample = [float(v) for v in rmse_per_sample]
        self.fbp_rmse_per_sample = [float(v) for v in fbp_rmse_per_sample]
        self.false_digit_rate = false_digit_rate
        self.false_digit_verdicts = _optional_list(false_digit_verdicts, bool)
        self.oracle_accuracy = oracle_accuracy
        self.confusion = confusion
        self.hu_rmse_per_sample = _optional_list(hu_rmse_per_sample, float)
        self.body_iou_per_sample = _optional_list(body_iou_per_sample, float)
        self.config_echo = dict(config_echo or {})

        self._validate()

    def _validate(self) -> None:
        if not self.rmse_per_sample:
            raise ValueError("评估报告至少需要一个样本")
        if len(self.fbp_rmse_per_sample) != self.n_samples:
            raise ValueError("FBP RMSE 数量与样本数不一致")
        for name in ("false_digit_rate", "oracle_accuracy"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} 必须在 [0, 1]: {value}")
        for name in _PER_SAMPLE_FIELDS:
            values = getattr(self, name)
            if values is not None and len(values) != self.n_samples:
                raise ValueError(f"{name} 数量与样本数不一致")

    @property
    def n_samples(self) -> int:
        return len(self.rmse_per_sample)

    @property
    def rmse_mean(self) -> float:
        return float(np.mean(self.rmse_per_sample))

    @property
    def fbp_rmse_mean(self) -> float:
        return float(np.mean(self.fbp_rmse_per_sample))

    @property
    def hu_rmse_mean(self) -> Optional[float]:
        if self.hu_rmse_per_sample is None:
            return None
        return float(np.mean(self.hu_rmse_per_sample))

    @property
    def body_iou_mean(self) -> Optional[float]:
        if self.body_iou_per_sample is None:
            return None
        return float(np.mean(self.body_iou_per_sample))

    def summary(self) -> list[tuple[str, Any]]:
        """用于控制台显示的主要指标"""
        items: list[tuple[str, Any]] = [
            ("run_id", self.run_id),
            ("n_samples", self.n_samples),
            ("rmse_mean", self.rmse_mean),
            ("fbp_rmse_mean", self.fbp_rmse_mean),
        ]
        if self.false_digit_rate is not None:
            items.append(("false_digit_rate", self.false_digit_rate))
            items.append(("oracle_accuracy", self.oracle_accuracy))
        if self.hu_rmse_per_sample is not None:
            items.append(("hu_rmse_mean", self.hu_rmse_mean))
            items.append(("body_iou_mean", self.body_iou_mean))
        return items

    def to_items(self) -> list[tuple[str, Any]]:
        """完整报告（固定顺序）"""
        items = self.summary()
        if self.confusion is not None:
            flat = np.asarray(self.confusion).reshape(-1).tolist()
            items.append(("oracle_confusion", flat))
        items.append(("rmse_per_sample", self.rmse_per_sample))
        items.append(("fbp_rmse_per_sample", self.fbp_rmse_per_sample))
        if self.false_digit_verdicts is not None:
            items.append(
                ("false_digit_per_sample", [int(v) for v in self.false_digit_verdicts])
            )
        if self.hu_rmse_per_sample is not None:
            items.append(("hu_rmse_per_sample", self.hu_rmse_per_sample))
            items.append(("body_iou_per_sample", self.body_iou_per_sample))
        for key in sorted(self.config_echo):
            items.append((f"config.{key}", self.config_echo[key]))
        return items

    def to_text(self) -> str:
        return format_key_values(self.to_items())

    def save(self, path: PathLike) -> None:
        write_key_values(path, self.to_items())

    def __repr__(self) -> str:
        return (
            f"EvalReport(run_id={self.run_id}, n={self.n_samples}, "
            f"rmse_mean={self.rmse_mean:.6g})"
        )


def read_report(text: str) -> dict[str, str]:
    """把报告文本解析为键值字典（值保持字符串）"""
    return parse_key_values(text)
