"""
实验组装
把配置、数据、训练和评估串成命令行使用的完整流程
"""

from __future__ import annotations

import os
import time
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from .config import CONFIG_FILE, RunConfig, parse_run_config
from .core.grid import AngleSet
from .data.mnist import find_mnist_files, load_mnist
from .data.phantom import PhantomSpec, generate_phantom_set
from .data.records import DatasetSplit
from .data.splits import (
    split_exclude_digit,
    split_random,
    split_random_sized,
    subsample_split,
)
from .engine.oracle_training import oracle_train_config, train_oracle
from .engine.sinogram_cache import collection_fingerprint, precompute_sinograms
from .engine.trainer import WEIGHTS_FILE, TrainResult, train
from .evaluation.evaluator import evaluate_run
from .evaluation.metrics import check_oracle_gate
from .evaluation.report import EvalReport
from .model.automap import AutomapConfig, load_params
from .model.oracle import DigitOracle, load_oracle, save_oracle
from .services.formats import write_atomic, write_key_values
from .ui.console_renderer import ConsoleRenderer
from .utils.constants import (
    DEFAULT_PITCH_MM,
    MNIST_USED_COUNT,
    ORACLE_HELDOUT_COUNT,
    Experiment,
    SplitProtocol,
)
from .utils.errors import ConfigError, ShapeError
from .utils.hashing import file_blob_hash

PathLike = Union[str, os.PathLike]

TRAIN_REPORT_FILE = "train_report.txt"
TIMING_FILE = "timing.txt"
EVAL_TIMING_FILE = "eval_timing.txt"
INPUT_CACHE_FILE = "inputs.npz"


class ExperimentData:
    """一次实验的数据划分及其输入来源的内容哈希"""

    def __init__(self, split: DatasetSplit, input_hashes: dict[str, str]):
        self.split = split
        self.input_hashes = input_hashes

    def __repr__(self) -> str:
        return f"ExperimentData({self.split!r})"


def experiment_angles(run: RunConfig) -> AngleSet:
    return AngleSet.from_preset(run.angles)


def experiment_model(run: RunConfig) -> AutomapConfig:
    """按模型预设和角度数确定网络结构"""
    return AutomapConfig.from_preset(run.model_preset, len(experiment_angles(run)))


def _load_mnist_split(run: RunConfig) -> ExperimentData:
    images_path, labels_path = find_mnist_files(run.data_dir, "train")
    data = load_mnist(images_path, labels_path, limit=MNIST_USED_COUNT)
    hashes = {
        "mnist_images": file_blob_hash(images_path),
        "mnist_labels": file_blob_hash(labels_path),
    }

    if run.experiment is Experiment.MNIST_RANDOM:
        if run.train_size is None and run.test_size is None:
            split = split_random(data, run.seed)
        else:
            if run.train_size is None or run.test_size is None:
                raise ConfigError("随机划分需要同时给出 train_size 和 test_size")
            split = split_random_sized(data, run.train_size, run.test_size, run.seed)
    else:
        split = split_exclude_digit(data, run.excluded_digit)
        if run.train_size is not None or run.test_size is not None:
            split = subsample_split(split, run.train_size, run.test_size, run.seed)
    return ExperimentData(split, hashes)


def _phantom_split(run: RunConfig) -> ExperimentData:
    # 测试体模的编号接在训练体模之后，保证两者不重叠
    total = run.phantom_train_count + run.phantom_test_count
    data = generate_phantom_set(PhantomSpec(), total, run.seed)
    split = DatasetSplit(
        data,
        np.arange(run.phantom_train_count),
        np.arange(run.phantom_train_count, total),
        SplitProtocol.RANDOM,
        seed=run.seed,
    )
    return ExperimentData(split, {"phantoms": collection_fingerprint(data)})


def load_experiment_data(run: RunConfig) -> ExperimentData:
    """
    按实验类型组装数据划分

    mnist_random: 前 48000 张训练图像随机划分；
    mnist_exclude: 同一批图像按排除数字划分；
    phantom: 合成体模，训练与测试种子不重叠
    """
    if run.experiment is Experiment.PHANTOM:
        return _phantom_split(run)
    return _load_mnist_split(run)


def prepare_run_dir(run: RunConfig) -> Path:
    """
    创建运行目录并写入规范配置

    目录名为运行ID；已存在且结果相关配置不同时拒绝

    Raises:
        ConfigError: 同一运行ID下已有不同的配置
    """
    root = Path(run.output_dir) / run.run_id
    config_path = root / CONFIG_FILE
    if config_path.is_file():
        text = config_path.read_text(encoding="utf-8")
        existing = parse_run_config(text, str(config_path))
        try:
            same = RunConfig(existing).identity() == run.identity()
        except ConfigError:
            same = False
        if not same:
            raise ConfigError(f"运行目录 {root} 中已有不同的配置，拒绝覆盖")
    root.mkdir(parents=True, exist_ok=True)
    write_atomic(config_path, run.canonical_yaml().encode("utf-8"))
    return root


def _train_report_items(
    run: RunConfig,
    data: ExperimentData,
    model_cfg: AutomapConfig,
    result: TrainResult,
) -> list[tuple[str, Any]]:
    split = data.split
    items: list[tuple[str, Any]] = [
        ("run_id", run.run_id),
        ("protocol", split.describe()),
        ("train_count", len(split.train_indices)),
        ("test_count", len(split.test_indices)),
        ("model_n", model_cfg.n),
        ("model_input_len", model_cfg.input_len),
        ("model_fc_dims", list(model_cfg.fc_dims)),
        ("epochs_completed", result.state.epoch),
        ("steps", result.state.step),
        ("final_loss", result.final_loss),
    ]
    for name in sorted(data.input_hashes):
        items.append((f"hash.{name}", data.input_hashes[name]))
    for key, value in sorted(run.to_dict().items()):
        items.append((f"config.{key}", value))
    return items


def run_training(
    run: RunConfig,
    renderer: Optional[ConsoleRenderer] = None,
    resume: bool = False,
) -> tuple[TrainResult, Path]:
    """
    执行训练实验

    检查点、损失记录和 train_report.txt 写在运行目录下；
    墙钟时间单独写入 timing.txt，使报告在重复运行间逐字节一致

    Args:
        run: 运行配置
        renderer: 进度输出
        resume: 从运行目录中已有的检查点继续

    Returns:
        (训练结果, 运行目录)
    """
    run.check_paths()
    started = time.perf_counter()
    run_dir = prepare_run_dir(run)
    if renderer:
        renderer.render_title(f"训练 {run.experiment.value} / {run.angles.value}")
        renderer.render_info(f"运行目录: {run_dir}")

    data = load_experiment_data(run)
    angles = experiment_angles(run)
    model_cfg = experiment_model(run)
    if renderer:
        renderer.render_info(f"数据划分: {data.split!r}")
    store = precompute_sinograms(
        data.split.data,
        angles,
        model_cfg.n,
        DEFAULT_PITCH_MM,
        cache_path=run_dir / INPUT_CACHE_FILE,
    )

    resume_from = run_dir if resume and (run_dir / WEIGHTS_FILE).is_file() else None
    result = train(
        data.split,
        run.train_config(),
        model_cfg,
        store=store,
        pitch_mm=DEFAULT_PITCH_MM,
        checkpoint_dir=run_dir,
        resume_from=resume_from,
        renderer=renderer,
    )

    write_key_values(
        run_dir / TRAIN_REPORT_FILE, _train_report_items(run, data, model_cfg, result)
    )
    write_key_values(
        run_dir / TIMING_FILE, [("train_wall_seconds", time.perf_counter() - started)]
    )
    if renderer:
        renderer.render_artifact("训练报告", run_dir / TRAIN_REPORT_FILE)
    return result, run_dir


def _load_gated_oracle(run: RunConfig) -> Optional[DigitOracle]:
    if run.experiment is Experiment.PHANTOM or run.oracle_path is None:
        return None
    oracle = load_oracle(run.oracle_path)
    check_oracle_gate(oracle)
    return oracle


def run_evaluation(
    run: RunConfig,
    weights_path: Optional[PathLike] = None,
    renderer: Optional[ConsoleRenderer] = None,
) -> tuple[EvalReport, Path]:
    """
    执行评估实验

    Args:
        run: 运行配置
        weights_path: 权重文件（默认为运行目录下的 weights.amap）
        renderer: 进度输出

    Raises:
        ConfigError: MNIST 实验未配置 oracle_path
        ShapeError: 权重与角度预设或模型预设不匹配
        OracleGateError: 判别器未达到准确率门槛
    """
    run.check_paths()
    if run.experiment is not Experiment.PHANTOM and run.oracle_path is None:
        raise ConfigError("MNIST 实验的评估需要配置 oracle_path（错误数字率）")
    started = time.perf_counter()
    run_dir = prepare_run_dir(run)
    weights = Path(weights_path) if weights_path is not None else run_dir / WEIGHTS_FILE
    params = load_params(weights)
    model_cfg = experiment_model(run)
    if params.config != model_cfg:
        raise ShapeError(
            f"权重 {weights} 的网络结构 {params.config} 与配置的角度/模型预设 {model_cfg} 不一致"
        )
    oracle = _load_gated_oracle(run)

    if renderer:
        renderer.render_title(f"评估 {run.experiment.value} / {run.angles.value}")
    data = load_experiment_data(run)
    report = evaluate_run(
        params,
        model_cfg,
        data.split,
        experiment_angles(run),
        oracle=oracle,
        pitch_mm=DEFAULT_PITCH_MM,
        output_dir=run_dir,
        run_id=run.run_id,
        config_echo=run.to_dict(),
        grid_samples=run.grid_samples,
        renderer=renderer,
    )
    elapsed = time.perf_counter() - started
    write_key_values(run_dir / EVAL_TIMING_FILE, [("eval_wall_seconds", elapsed)])
    if renderer:
        renderer.render_report("评估结果", report.summary())
    return report, run_dir


def run_oracle_training(
    data_dir: PathLike,
    out_path: PathLike,
    seed: int = 0,
    epochs: int = 5,
    renderer: Optional[ConsoleRenderer] = None,
) -> DigitOracle:
    """
    训练数字判别器并写出

    训练集为 MNIST 训练文件，留出集为 t10k 的前 5000 张；
    判别器先写出，再检查准确率门槛

    Raises:
        OracleGateError: 留出集准确率低于门槛
    """
    images_path, labels_path = find_mnist_files(data_dir, "train")
    test_images, test_labels = find_mnist_files(data_dir, "t10k")
    images = load_mnist(images_path, labels_path)
    heldout = load_mnist(test_images, test_labels, limit=ORACLE_HELDOUT_COUNT)
    if renderer:
        renderer.render_title("训练数字判别器")
        renderer.render_info(f"训练 {len(images)} 张 / 留出 {len(heldout)} 张")

    config = oracle_train_config(seed=seed, epochs=epochs)
    oracle = train_oracle(images, config, heldout, renderer=renderer)
    save_oracle(oracle, out_path)
    if renderer:
        renderer.render_artifact("判别器", out_path)
    check_oracle_gate(oracle)
    return oracle
