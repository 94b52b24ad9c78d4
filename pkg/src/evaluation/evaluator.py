"""
运行评估
对测试集做评估模式重建，计算指标，写报告和对比图
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from ..core.grid import AngleSet, ImageGrid, Sinogram
from ..data.intensity import normalized_to_hu
from ..data.records import DatasetSplit
from ..engine.sinogram_cache import SinogramStore, compute_vectors
from ..geometry.radon import fbp_reconstruct, normalization_scale
from ..model.automap import AutomapConfig, AutomapParams, reconstruct
from ..model.oracle import DigitOracle
from ..ui.console_renderer import ConsoleRenderer
from ..ui.grid_renderer import render_grid
from ..utils.constants import DEFAULT_PITCH_MM, IntensityDomain
from ..utils.errors import ShapeError
from .metrics import body_outline_iou, false_digit_rate, hu_rmse, rmse
from .report import EvalReport

PathLike = Union[str, os.PathLike]

REPORT_FILE = "eval_report.txt"
GRID_FILE = "grid.pgm"


def fbp_from_vector(
    vector: np.ndarray, angles: AngleSet, n: int, pitch_mm: float
) -> ImageGrid:
    """把归一化输入向量还原为正弦图后做 FBP"""
    values = vector.reshape(len(angles), n) * normalization_scale(n, pitch_mm)
    return fbp_reconstruct(Sinogram(values, angles, pitch_mm))


def evaluate_run(
    params: AutomapParams,
    cfg: AutomapConfig,
    split: DatasetSplit,
    angles: AngleSet,
    *,
    store: Optional[SinogramStore] = None,
    oracle: Optional[DigitOracle] = None,
    pitch_mm: float = DEFAULT_PITCH_MM,
    output_dir: Optional[PathLike] = None,
    run_id: str = "",
    config_echo: Optional[dict[str, Any]] = None,
    grid_samples: int = 8,
    confidence_threshold: Optional[float] = None,
    renderer: Optional[ConsoleRenderer] = None,
) -> EvalReport:
    """
    评估一次训练运行

    对每个测试样本做评估模式重建，计算 RMSE 与 FBP 基线 RMSE；
    体模数据额外计算 HU RMSE 与体轮廓 IoU；数字数据在给定判别器时计算错误数字率。
    预测在计算指标前截断到 [0, 1]。

    Args:
        params: 训练好的参数
        cfg: 网络配置
        split: 数据划分（使用其测试集）
        angles: 投影角度
        store: 与 split.data 对齐的预计算输入（None 时现场投影测试集）
        oracle: 数字判别器
        pitch_mm: 像素间距
        output_dir: 报告和对比图的输出目录
        run_id: 运行标识
        config_echo: 写入报告的配置
        grid_samples: 对比图中的样本数
        confidence_threshold: 错误数字判定的可选置信度阈值
        renderer: 进度输出

    Raises:
        ValueError: 测试集为空
        ShapeError: 参数与角度预设不匹配
        OracleGateError: 判别器未达到准确率门槛
    """
    test_indices = split.test_indices
    if len(test_indices) == 0:
        raise ValueError("测试集为空，无法评估")
    if params.config != cfg:
        raise ShapeError(f"参数配置 {params.config} 与网络配置 {cfg} 不一致")
    if len(angles) * cfg.n != cfg.input_len:
        raise ShapeError(
            f"角度数 {len(angles)} × {cfg.n} 与网络输入长度 {cfg.input_len} 不一致"
        )

    if store is not None:
        if store.row_length != cfg.input_len:
            raise ShapeError(
                f"缓存行长 {store.row_length} 与输入长度 {cfg.input_len} 不一致"
            )
        inputs = store.rows(test_indices)
    else:
        subset = split.data.subset(test_indices)
        inputs = compute_vectors(subset, angles, cfg.n, pitch_mm)

    if renderer:
        renderer.render_info(f"重建 {len(test_indices)} 个测试样本")
    predictions = np.clip(reconstruct(params, cfg, inputs), 0.0, 1.0)
    truths = split.data.normalized_targets(test_indices, cfg.n)

    rmse_values = []
    fbp_values = []
    fbp_images = []
    for index in range(len(test_indices)):
        truth = ImageGrid(truths[index], pitch_mm)
        pred = ImageGrid(predictions[index], pitch_mm)
        fbp = fbp_from_vector(inputs[index], angles, cfg.n, pitch_mm)
        rmse_values.append(rmse(pred, truth))
        fbp_values.append(rmse(fbp, truth))
        if index < grid_samples:
            fbp_images.append(fbp)

    hu_values = None
    iou_values = None
    if split.data.domain is IntensityDomain.HOUNSFIELD:
        hu_values = []
        iou_values = []
        # 真值先经目标尺寸缩放，再映射回 HU
        for index in range(len(test_indices)):
            truth_hu = normalized_to_hu(ImageGrid(truths[index], pitch_mm))
            pred = ImageGrid(predictions[index], pitch_mm)
            hu_values.append(hu_rmse(pred, truth_hu))
            iou_values.append(body_outline_iou(normalized_to_hu(pred), truth_hu))

    digit_result = None
    if split.data.is_digit and oracle is not None:
        digit_result = false_digit_rate(
            predictions,
            split.data.labels[test_indices],
            oracle,
            confidence_threshold=confidence_threshold,
        )

    report = EvalReport(
        run_id,
        rmse_values,
        fbp_values,
        false_digit_rate=None if digit_result is None else digit_result.rate,
        false_digit_verdicts=None if digit_result is None else digit_result.verdicts,
        oracle_accuracy=None if digit_result is None else digit_result.oracle_accuracy,
        confusion=None if digit_result is None else digit_result.confusion,
        hu_rmse_per_sample=hu_values,
        body_iou_per_sample=iou_values,
        config_echo=config_echo,
    )

    if output_dir is not None:
        root = Path(output_dir)
        root.mkdir(parents=True, exist_ok=True)
        report.save(root / REPORT_FILE)
        rows = [
            (
                ImageGrid(truths[i], pitch_mm),
                fbp_images[i],
                ImageGrid(predictions[i], pitch_mm),
            )
            for i in range(min(grid_samples, len(test_indices)))
        ]
        if rows:
            render_grid(rows, root / GRID_FILE)
        if renderer:
            renderer.render_artifact("评估报告", root / REPORT_FILE)
    return report
