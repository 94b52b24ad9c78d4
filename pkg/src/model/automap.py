"""
AUTOMAP 网络
三层全连接（BN + tanh）后接三层卷积（前两层 BN + ReLU，最后一层只有 ReLU）
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

import numpy as np

from ..core.ops import (
    RunningStats,
    add_bias,
    batchnorm,
    conv2d,
    matmul,
    relu_act,
    reshape,
    tanh_act,
)
from ..core.tensor import Tensor
from ..services.formats import (
    BinaryReader,
    BinaryWriter,
    read_bytes,
    read_header,
    read_tensors,
    write_atomic,
    write_header,
    write_tensors,
)
from ..utils.constants import MATMUL_ROW_TILE, WEIGHTS_MAGIC, Mode, ModelPreset
from ..utils.errors import FormatError, ShapeError

PathLike = Union[str, os.PathLike]

# 预设: (n, 全连接宽度, 卷积 (卷积核数, 尺寸))
_PRESETS = {
    ModelPreset.FULL: (64, (8192, 4096, 4096), ((64, 5), (64, 5), (1, 7))),
    ModelPreset.SMALL: (32, (2048, 1024, 1024), ((64, 5), (64, 5), (1, 7))),
}


@dataclass(frozen=True)
class AutomapConfig:
    """
    网络结构配置

    Attributes:
        n: 输出图像边长
        input_len: 输入长度 = 角度数 × 探测器单元数
        fc_dims: 全连接层宽度，最后一层等于 n²
        conv_spec: 每层卷积 (卷积核数, 卷积核尺寸)，最后一层卷积核数为 1
        preset: 来源预设（不参与相等比较）
    """

    n: int
    input_len: int
    fc_dims: tuple[int, ...]
    conv_spec: tuple[tuple[int, int], ...]
    preset: Optional[ModelPreset] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "fc_dims", tuple(int(d) for d in self.fc_dims))
        object.__setattr__(
            self, "conv_spec", tuple((int(f), int(k)) for f, k in self.conv_spec)
        )
        self._validate()

    def _validate(self) -> None:
        if self.n < 2:
            raise ValueError(f"输出边长必须 ≥ 2: {self.n}")
        if self.input_len < 1:
            raise ValueError(f"输入长度必须为正: {self.input_len}")
        if not self.fc_dims or any(d < 1 for d in self.fc_dims):
            raise ValueError(f"全连接宽度无效: {self.fc_dims}")
        if self.fc_dims[-1] != self.n * self.n:
            raise ValueError(
                f"最后一层全连接宽度 {self.fc_dims[-1]} 必须等于 n² = {self.n * self.n}"
            )
        if not self.conv_spec:
            raise ValueError("至少需要一层卷积")
        for filters, kernel in self.conv_spec:
            if filters < 1:
                raise ValueError(f"卷积核数必须为正: {filters}")
            if kernel < 1 or kernel % 2 == 0:
                raise ValueError(f"卷积核尺寸必须为正奇数: {kernel}")
        if self.conv_spec[-1][0] != 1:
            raise ValueError(f"最后一层卷积核数必须为 1: {self.conv_spec[-1][0]}")

    @classmethod
    def from_preset(
        cls, preset: Union[ModelPreset, str], num_angles: int
    ) -> "AutomapConfig":
        """
        由预设和角度数创建配置

        Args:
            preset: full（n=64）或 small（n=32）
            num_angles: 投影角度数
        """
        try:
            preset = ModelPreset(preset)
        except ValueError:
            raise ValueError(f"未知的模型预设: {preset}") from None
        n, fc_dims, conv_spec = _PRESETS[preset]
        return cls(n, num_angles * n, fc_dims, conv_spec, preset)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "input_len": self.input_len,
            "fc_dims": list(self.fc_dims),
            "conv_spec": [list(layer) for layer in self.conv_spec],
            "preset": self.preset.value if self.preset else None,
        }


def parameter_shapes(cfg: AutomapConfig) -> dict[str, tuple[int, ...]]:
    """
    按固定顺序列出所有张量（含 BN 运行统计量）的名称与形状
    """
    shapes: dict[str, tuple[int, ...]] = {}
    fan_in = cfg.input_len
    for index, width in enumerate(cfg.fc_dims, start=1):
        prefix = f"fc{index}"
        shapes[f"{prefix}.weight"] = (fan_in, width)
        shapes[f"{prefix}.bias"] = (width,)
        for suffix in ("gamma", "beta", "running_mean", "running_var"):
            shapes[f"{prefix}.bn.{suffix}"] = (width,)
        fan_in = width

    channels = 1
    last = len(cfg.conv_spec)
    for index, (filters, kernel) in enumerate(cfg.conv_spec, start=1):
        prefix = f"conv{index}"
        shapes[f"{prefix}.weight"] = (filters, channels, kernel, kernel)
        shapes[f"{prefix}.bias"] = (filters,)
        if index < last:
            for suffix in ("gamma", "beta", "running_mean", "running_var"):
                shapes[f"{prefix}.bn.{suffix}"] = (filters,)
        channels = filters
    return shapes


def _is_running_stat(name: str) -> bool:
    return name.endswith(".running_mean") or name.endswith(".running_var")


def parameter_count(cfg: AutomapConfig) -> int:
    """可训练参数总数（权重、偏置、gamma、beta；不含运行统计量）"""
    return sum(
        int(np.prod(shape))
        for name, shape in parameter_shapes(cfg).items()
        if not _is_running_stat(name)
    )


class AutomapParams:
    """
    网络参数集合

    tensors 保存可训练张量，stats 保存各 BN 层的运行统计量（以层前缀为键）
    """

    def __init__(
        self,
        config: AutomapConfig,
        tensors: dict[str, Tensor],
        stats: dict[str, RunningStats],
    ):
        self.config = config
        self.tensors = tensors
        self.stats = stats

        self._validate()

    def _validate(self) -> None:
        expected = parameter_shapes(self.config)
        for name, shape in expected.items():
            if _is_running_stat(name):
                layer = name.rsplit(".", 1)[0]
                if layer not in self.stats:
                    raise ShapeError(f"缺少运行统计量: {layer}")
                array = (
                    self.stats[layer].mean
                    if name.endswith("running_mean")
                    else self.stats[layer].var
                )
                if array.shape != shape:
                    raise ShapeError(f"{name} 形状 {array.shape} 与配置 {shape} 不一致")
            else:
                if name not in self.tensors:
                    raise ShapeError(f"缺少参数: {name}")
                if self.tensors[name].dims != shape:
                    raise ShapeError(
                        f"{name} 形状 {self.tensors[name].dims} 与配置 {shape} 不一致"
                    )

    def trainable(self) -> Iterator[tuple[str, Tensor]]:
        """按固定顺序遍历可训练张量"""
        for name in parameter_shapes(self.config):
            if not _is_running_stat(name):
                yield name, self.tensors[name]

    def zero_grad(self) -> None:
        for tensor in self.tensors.values():
            tensor.zero_grad()

    def requires_grad(self, flag: bool = True) -> None:
        for tensor in self.tensors.values():
            tensor.requires_grad = flag

    def named_arrays(self) -> dict[str, np.ndarray]:
        """全部张量（含运行统计量），按文件中的顺序"""
        arrays: dict[str, np.ndarray] = {}
        for name in parameter_shapes(self.config):
            if _is_running_stat(name):
                layer, suffix = name.rsplit(".", 1)
                stats = self.stats[layer]
                arrays[name] = stats.mean if suffix == "running_mean" else stats.var
            else:
                arrays[name] = self.tensors[name].data
        return arrays

    @classmethod
    def from_arrays(
        cls, config: AutomapConfig, arrays: dict[str, np.ndarray]
    ) -> "AutomapParams":
        tensors: dict[str, Tensor] = {}
        stats: dict[str, RunningStats] = {}
        for name in parameter_shapes(config):
            if name not in arrays:
                raise ShapeError(f"缺少张量: {name}")
            if _is_running_stat(name):
                continue
            tensors[name] = Tensor(arrays[name], requires_grad=True, name=name)
        for name in parameter_shapes(config):
            if name.endswith(".running_mean"):
                layer = name.rsplit(".", 1)[0]
                stats[layer] = RunningStats(
                    arrays[f"{layer}.running_mean"], arrays[f"{layer}.running_var"]
                )
        return cls(config, tensors, stats)

    def copy(self) -> "AutomapParams":
        return AutomapParams.from_arrays(self.config, self.named_arrays())

    def __repr__(self) -> str:
        count = parameter_count(self.config)
        return f"AutomapParams(n={self.config.n}, parameters={count})"


def init_params(cfg: AutomapConfig, seed: int) -> AutomapParams:
    """
    初始化参数

    权重 Glorot 均匀分布 U(−a, a)，a = sqrt(6/(fan_in+fan_out))；
    偏置 0，gamma 1，beta 0，运行均值 0，运行方差 1
    """
    rng = np.random.default_rng(seed)
    arrays: dict[str, np.ndarray] = {}
    for name, shape in parameter_shapes(cfg).items():
        suffix = name.rsplit(".", 1)[1]
        if suffix == "weight":
            if len(shape) == 2:
                fan_in, fan_out = shape
            else:
                receptive = shape[2] * shape[3]
                fan_in, fan_out = shape[1] * receptive, shape[0] * receptive
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            arrays[name] = rng.uniform(-limit, limit, size=shape)
        elif suffix in ("gamma", "running_var"):
            arrays[name] = np.ones(shape)
        else:
            arrays[name] = np.zeros(shape)
    return AutomapParams.from_arrays(cfg, arrays)


def forward(params: AutomapParams, cfg: AutomapConfig, x: Tensor, mode: Mode) -> Tensor:
    """
    前向传播

    [FC → BN → tanh] ×3 → reshape B×1×n×n → [conv → BN → ReLU] ×2 → conv → ReLU

    Args:
        params: 网络参数
        cfg: 网络配置（须与 params.config 一致）
        x: B×input_len 输入
        mode: 训练或评估（训练模式要求 B ≥ 2）

    Returns:
        B×1×n×n 输出，非负
    """
    if params.config != cfg:
        raise ShapeError(f"参数配置与网络配置不一致: {params.config} vs {cfg}")
    if len(x.dims) != 2 or x.dims[1] != cfg.input_len:
        raise ShapeError(f"输入形状 {x.dims} 与输入长度 {cfg.input_len} 不一致")

    t = params.tensors
    h = x
    for index in range(1, len(cfg.fc_dims) + 1):
        prefix = f"fc{index}"
        h = add_bias(matmul(h, t[f"{prefix}.weight"]), t[f"{prefix}.bias"])
        h = batchnorm(
            h,
            t[f"{prefix}.bn.gamma"],
            t[f"{prefix}.bn.beta"],
            params.stats[f"{prefix}.bn"],
            mode,
        )
        h = tanh_act(h)

    h = reshape(h, (x.dims[0], 1, cfg.n, cfg.n))
    last = len(cfg.conv_spec)
    for index in range(1, last + 1):
        prefix = f"conv{index}"
        h = conv2d(h, t[f"{prefix}.weight"], t[f"{prefix}.bias"])
        if index < last:
            h = batchnorm(
                h,
                t[f"{prefix}.bn.gamma"],
                t[f"{prefix}.bn.beta"],
                params.stats[f"{prefix}.bn"],
                mode,
            )
        h = relu_act(h)
    return h


def reconstruct(
    params: AutomapParams,
    cfg: AutomapConfig,
    inputs: np.ndarray,
    chunk: int = MATMUL_ROW_TILE,
) -> np.ndarray:
    """
    评估模式批量重建

    Args:
        inputs: N×input_len 归一化正弦图向量

    Returns:
        N×n×n 重建图像（网络原始输出，未截断）
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2:
        raise ShapeError(f"重建输入必须为二维: {inputs.shape}")
    out = np.empty((inputs.shape[0], cfg.n, cfg.n), dtype=np.float64)
    for start in range(0, inputs.shape[0], chunk):
        batch = Tensor(inputs[start : start + chunk])
        result = forward(params, cfg, batch, Mode.EVAL).data
        out[start : start + batch.dims[0]] = result[:, 0]
    return out


def _encode_config(writer: BinaryWriter, cfg: AutomapConfig) -> None:
    writer.u32(cfg.n)
    writer.u32(cfg.input_len)
    writer.u32(len(cfg.fc_dims))
    for width in cfg.fc_dims:
        writer.u32(width)
    writer.u32(len(cfg.conv_spec))
    for filters, kernel in cfg.conv_spec:
        writer.u32(filters)
        writer.u32(kernel)


def _decode_config(reader: BinaryReader) -> AutomapConfig:
    n = reader.u32()
    input_len = reader.u32()
    fc_dims = tuple(reader.u32() for _ in range(reader.u32()))
    conv_spec = tuple((reader.u32(), reader.u32()) for _ in range(reader.u32()))
    try:
        cfg = AutomapConfig(n, input_len, fc_dims, conv_spec)
    except ValueError as exc:
        raise FormatError(f"权重文件中的配置无效: {reader.source}: {exc}") from exc
    for preset, (p_n, p_fc, p_conv) in _PRESETS.items():
        if (n, fc_dims, conv_spec) == (p_n, p_fc, p_conv):
            return AutomapConfig(n, input_len, fc_dims, conv_spec, preset)
    return cfg


def encode_params(params: AutomapParams) -> bytes:
    """权重文件: 魔数 AMAP、版本、嵌入配置、张量块"""
    writer = BinaryWriter()
    write_header(writer, WEIGHTS_MAGIC)
    _encode_config(writer, params.config)
    write_tensors(writer, params.named_arrays())
    return writer.getvalue()


def decode_params(data: bytes, source: str = "<memory>") -> AutomapParams:
    """
    解析权重文件

    Raises:
        FormatError: 魔数、版本错误，或张量形状与嵌入配置不一致
    """
    reader = BinaryReader(data, source)
    read_header(reader, WEIGHTS_MAGIC)
    cfg = _decode_config(reader)
    arrays = read_tensors(reader)
    reader.expect_end()

    expected = parameter_shapes(cfg)
    if set(arrays) != set(expected):
        missing = sorted(set(expected) - set(arrays))
        extra = sorted(set(arrays) - set(expected))
        raise FormatError(f"权重文件张量与配置不一致: {source} (缺少 {missing}, 多余 {extra})")
    for name, shape in expected.items():
        if arrays[name].shape != shape:
            raise FormatError(
                f"权重文件中 {name} 形状 {arrays[name].shape} 与配置 {shape} 不一致: {source}"
            )
    return AutomapParams.from_arrays(cfg, arrays)


def save_params(params: AutomapParams, path: PathLike) -> None:
    write_atomic(path, encode_params(params))


def load_params(path: PathLike) -> AutomapParams:
    return decode_params(read_bytes(path), str(path))
