"""
配置管理模块
运行环境配置（.env / 环境变量）与实验运行配置（YAML）
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Union

import yaml
from dotenv import load_dotenv

from .engine.train_config import TrainConfig
from .utils.constants import AnglePreset, Experiment, ModelPreset
from .utils.errors import ConfigError
from .utils.hashing import short_hash

# 加载环境变量
load_dotenv()

PathLike = Union[str, os.PathLike]

CONFIG_FILE = "config.yaml"


def _env_flag(name: str) -> bool:
    return os.getenv(name, "").strip().lower() in ("1", "true", "yes", "on")


class RuntimeConfig:
    """运行环境配置类"""

    def __init__(self) -> None:
        threads = os.getenv("AUTOMAP_NUM_THREADS")
        self.num_threads: Optional[int]
        try:
            self.num_threads = int(threads) if threads else None
        except ValueError:
            self.num_threads = -1
        self.data_dir = os.getenv("AUTOMAP_DATA_DIR")
        self.output_dir = os.getenv("AUTOMAP_OUTPUT_DIR")
        self.debug = _env_flag("AUTOMAP_DEBUG")

    def validate(self) -> bool:
        """验证配置是否有效"""
        if self.num_threads is not None and self.num_threads < 1:
            return False
        return True

    def __repr__(self) -> str:
        return (
            f"RuntimeConfig(num_threads={self.num_threads}, data_dir={self.data_dir}, "
            f"output_dir={self.output_dir}, debug={self.debug})"
        )


def _as_int(key: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"配置项 {key} 必须是整数: {value!r}")
    return value


def _as_float(key: str, value: Any) -> float:
    # YAML 1.1 把 2e-5 这类写法读成字符串
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ConfigError(f"配置项 {key} 必须是数值: {value!r}")
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"配置项 {key} 必须是数值: {value!r}") from None


def _as_str(key: str, value: Any) -> str:
    if not isinstance(value, str) or not value:
        raise ConfigError(f"配置项 {key} 必须是非空字符串: {value!r}")
    return value


def _as_enum(enum_type: type) -> Callable[[str, Any], Any]:
    def convert(key: str, value: Any) -> Any:
        try:
            return enum_type(value)
        except ValueError:
            choices = ", ".join(member.value for member in enum_type)
            raise ConfigError(f"配置项 {key} 的值 {value!r} 无效，可选: {choices}") from None

    return convert


def _optional(convert: Callable[[str, Any], Any]) -> Callable[[str, Any], Any]:
    def wrapped(key: str, value: Any) -> Any:
        return None if value is None else convert(key, value)

    return wrapped


# 配置项: (默认值, 类型转换)
_FIELDS: dict[str, tuple[Any, Callable[[str, Any], Any]]] = {
    "experiment": (Experiment.MNIST_RANDOM, _as_enum(Experiment)),
    "angles": (AnglePreset.FOUR_VIEW, _as_enum(AnglePreset)),
    "excluded_digit": (2, _as_int),
    "model_preset": (ModelPreset.FULL, _as_enum(ModelPreset)),
    "epochs": (50, _as_int),
    "learning_rate": (2e-5, _as_float),
    "rmsprop_rho": (0.9, _as_float),
    "rmsprop_eps": (1e-8, _as_float),
    "batch_size": (64, _as_int),
    "checkpoint_every": (5, _as_int),
    "seed": (0, _as_int),
    "data_dir": ("data/mnist", _as_str),
    "output_dir": ("runs", _as_str),
    "train_size": (None, _optional(_as_int)),
    "test_size": (None, _optional(_as_int)),
    "phantom_train_count": (2000, _as_int),
    "phantom_test_count": (200, _as_int),
    "oracle_path": (None, _optional(_as_str)),
    "grid_samples": (8, _as_int),
}

# 只决定文件位置或只在评估时使用的配置项，不参与运行ID
_NON_IDENTITY_KEYS = ("data_dir", "output_dir", "oracle_path", "grid_samples")


def _dump_yaml(values: Mapping[str, Any]) -> str:
    return yaml.safe_dump(dict(values), sort_keys=True, default_flow_style=False)


class RunConfig:
    """
    实验运行配置类

    优先级: 内置默认值 < 环境变量 < 配置文件 < 命令行参数
    """

    def __init__(self, values: Optional[Mapping[str, Any]] = None):
        """
        初始化运行配置

        Args:
            values: 配置项（缺省项取默认值）

        Raises:
            ConfigError: 未知配置项、类型错误或取值越界
        """
        values = dict(values or {})
        unknown = sorted(set(values) - set(_FIELDS))
        if unknown:
            raise ConfigError(f"未知的配置项: {unknown[0]}")

        self.experiment: Experiment
        self.angles: AnglePreset
        self.excluded_digit: int
        self.model_preset: ModelPreset
        self.epochs: int
        self.learning_rate: float
        self.rmsprop_rho: float
        self.rmsprop_eps: float
        self.batch_size: int
        self.checkpoint_every: int
        self.seed: int
        self.data_dir: str
        self.output_dir: str
        self.train_size: Optional[int]
        self.test_size: Optional[int]
        self.phantom_train_count: int
        self.phantom_test_count: int
        self.oracle_path: Optional[str]
        self.grid_samples: int
        for key, (default, convert) in _FIELDS.items():
            value = values.get(key, default)
            setattr(self, key, convert(key, value) if key in values else value)

        self._validate()

    def _validate(self) -> None:
        if not 0 <= self.excluded_digit <= 9:
            raise ConfigError(f"配置项 excluded_digit 必须在 [0, 9]: {self.excluded_digit}")
        for key in ("train_size", "test_size"):
            value = getattr(self, key)
            if value is not None and value < 1:
                raise ConfigError(f"配置项 {key} 必须为正: {value}")
        for key in ("phantom_train_count", "phantom_test_count", "grid_samples"):
            if getattr(self, key) < 1:
                raise ConfigError(f"配置项 {key} 必须为正: {getattr(self, key)}")
        try:
            self.train_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def train_config(self) -> TrainConfig:
        """对应的训练配置"""
        return TrainConfig(
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            rmsprop_rho=self.rmsprop_rho,
            rmsprop_eps=self.rmsprop_eps,
            batch_size=self.batch_size,
            seed=self.seed,
            checkpoint_every=self.checkpoint_every,
            angle_preset=self.angles,
        )

    def to_dict(self) -> dict[str, Any]:
        """纯 YAML 类型的字典（枚举转为字符串）"""
        result: dict[str, Any] = {}
        for key in _FIELDS:
            value = getattr(self, key)
            result[key] = value.value if hasattr(value, "value") else value
        return result

    def identity(self) -> dict[str, Any]:
        """决定训练结果的配置项"""
        items = self.to_dict().items()
        return {k: v for k, v in items if k not in _NON_IDENTITY_KEYS}

    def canonical_yaml(self) -> str:
        """规范形式: 按键排序的 YAML"""
        return _dump_yaml(self.to_dict())

    @property
    def run_id(self) -> str:
        """运行ID: 结果相关配置规范形式的 SHA-1 前 12 位"""
        return short_hash(_dump_yaml(self.identity()))

    def replace(self, **overrides: Any) -> "RunConfig":
        """返回覆盖部分配置项后的新配置（值为 None 的覆盖项忽略）"""
        values = self.to_dict()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig(values)

    def check_paths(self) -> None:
        """
        检查配置引用的路径在启动时存在

        Raises:
            ConfigError: 路径不存在
        """
        needs_mnist = self.experiment is not Experiment.PHANTOM
        if needs_mnist and not Path(self.data_dir).is_dir():
            raise ConfigError(f"配置项 data_dir 指向的目录不存在: {self.data_dir}")
        if self.oracle_path is not None and not Path(self.oracle_path).is_file():
            raise ConfigError(f"配置项 oracle_path 指向的文件不存在: {self.oracle_path}")

    def __eq__(self, other: object) -> bool:
        return isinstance(other, RunConfig) and self.to_dict() == other.to_dict()

    def __repr__(self) -> str:
        return (
            f"RunConfig(run_id={self.run_id}, experiment={self.experiment.value}, "
            f"angles={self.angles.value}, model_preset={self.model_preset.value})"
        )


def parse_run_config(text: str, source: str = "<memory>") -> dict[str, Any]:
    """
    解析 YAML 配置文本

    Raises:
        ConfigError: YAML 语法错误或顶层不是映射
    """
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: YAML 解析失败: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: 顶层必须是键值映射")
    return data


def load_run_config(
    path: Optional[PathLike] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    runtime: Optional[RuntimeConfig] = None,
) -> RunConfig:
    """
    按优先级合并配置

    Args:
        path: YAML 配置文件（None 表示只用默认值和环境变量）
        overrides: 命令行参数（值为 None 的项忽略）
        runtime: 环境配置（默认使用全局实例）

    Raises:
        FileNotFoundError: 配置文件不存在
        ConfigError: 配置无效
    """
    runtime = runtime if runtime is not None else runtime_config
    values: dict[str, Any] = {}
    if runtime.data_dir:
        values["data_dir"] = runtime.data_dir
    if runtime.output_dir:
        values["output_dir"] = runtime.output_dir
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"配置文件不存在: {path}")
        file_values = parse_run_config(path.read_text(encoding="utf-8"), str(path))
        unknown = sorted(set(file_values) - set(_FIELDS))
        if unknown:
            raise ConfigError(f"{path}: 未知的配置项: {unknown[0]}")
        values.update(file_values)
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(values)


# 全局配置实例
runtime_config = RuntimeConfig()
