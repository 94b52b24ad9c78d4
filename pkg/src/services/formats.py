"""
文件格式服务
二进制容器（正弦图、图像、权重、优化器状态、判别器）、PGM 图像、键值文档与损失日志
"""

from __future__ import annotations

import csv
import io
import os
import struct
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from ..core.grid import AngleSet, ImageGrid, Sinogram
from ..utils.constants import (
    FORMAT_VERSION,
    IMAGE_MAGIC,
    SINOGRAM_MAGIC,
    IntensityDomain,
)
from ..utils.errors import FormatError

PathLike = Union[str, os.PathLike]

_DOMAIN_CODES = {IntensityDomain.NORMALIZED: 0, IntensityDomain.HOUNSFIELD: 1}
_DOMAIN_BY_CODE = {code: domain for domain, code in _DOMAIN_CODES.items()}

LOSS_LOG_HEADER = ("epoch", "step", "loss")


class BinaryWriter:
    """小端二进制写入器"""

    def __init__(self) -> None:
        self._buffer = io.BytesIO()

    def raw(self, data: bytes) -> None:
        self._buffer.write(data)

    def u8(self, value: int) -> None:
        self._buffer.write(struct.pack("<B", value))

    def u16(self, value: int) -> None:
        self._buffer.write(struct.pack("<H", value))

    def u32(self, value: int) -> None:
        self._buffer.write(struct.pack("<I", value))

    def f64(self, value: float) -> None:
        self._buffer.write(struct.pack("<d", value))

    def f64_array(self, values: np.ndarray) -> None:
        self._buffer.write(np.ascontiguousarray(values, dtype="<f8").tobytes())

    def getvalue(self) -> bytes:
        return self._buffer.getvalue()


class BinaryReader:
    """
    小端二进制读取器

    任何越界读取都视为文件截断
    """

    def __init__(self, data: bytes, source: str = "<memory>"):
        self._data = data
        self._offset = 0
        self.source = source

    def _take(self, count: int) -> bytes:
        end = self._offset + count
        if count < 0 or end > len(self._data):
            raise FormatError(
                f"文件被截断: {self.source} (偏移 {self._offset}, 需要 {count} 字节)"
            )
        chunk = self._data[self._offset : end]
        self._offset = end
        return chunk

    def raw(self, count: int) -> bytes:
        return self._take(count)

    def u8(self) -> int:
        return struct.unpack("<B", self._take(1))[0]

    def u16(self) -> int:
        return struct.unpack("<H", self._take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self._take(4))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self._take(8))[0]

    def f64_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self._take(8 * count), dtype="<f8").astype(np.float64)

    def expect_end(self) -> None:
        if self._offset != len(self._data):
            raise FormatError(
                f"文件末尾有多余数据: {self.source} ({len(self._data) - self._offset} 字节)"
            )


def write_atomic(path: PathLike, data: bytes) -> None:
    """先写临时文件再替换，避免中断时留下半个文件"""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = target.with_name(target.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, target)


def read_bytes(path: PathLike) -> bytes:
    """读取文件，缺失时抛出带路径的 FileNotFoundError"""
    target = Path(path)
    if not target.is_file():
        raise FileNotFoundError(f"文件不存在: {target}")
    return target.read_bytes()


def write_header(writer: BinaryWriter, magic: bytes) -> None:
    writer.raw(magic)
    writer.u32(FORMAT_VERSION)


def read_header(reader: BinaryReader, magic: bytes) -> None:
    """校验魔数与版本"""
    found = reader.raw(len(magic))
    if found != magic:
        raise FormatError(f"魔数错误: {reader.source} (期望 {magic!r}, 实际 {found!r})")
    version = reader.u32()
    if version != FORMAT_VERSION:
        raise FormatError(f"不支持的版本: {reader.source} (版本 {version})")


def write_tensors(writer: BinaryWriter, tensors: Mapping[str, np.ndarray]) -> None:
    """
    张量块: u32 数量，然后每个张量 u16 名称长度、名称、u8 秩、u32 维度、f64 数据
    """
    writer.u32(len(tensors))
    for name, array in tensors.items():
        encoded = name.encode("utf-8")
        writer.u16(len(encoded))
        writer.raw(encoded)
        writer.u8(array.ndim)
        for extent in array.shape:
            writer.u32(extent)
        writer.f64_array(array)


def read_tensors(reader: BinaryReader) -> dict[str, np.ndarray]:
    """读取张量块（保持文件中的顺序）"""
    tensors: dict[str, np.ndarray] = {}
    for _ in range(reader.u32()):
        name = reader.raw(reader.u16()).decode("utf-8")
        rank = reader.u8()
        dims = tuple(reader.u32() for _ in range(rank))
        count = int(np.prod(dims)) if dims else 1
        tensors[name] = reader.f64_array(count).reshape(dims)
    return tensors


def save_tensor_file(
    path: PathLike, magic: bytes, tensors: Mapping[str, np.ndarray]
) -> None:
    """写入无额外头部的张量容器（优化器状态、判别器）"""
    writer = BinaryWriter()
    write_header(writer, magic)
    write_tensors(writer, tensors)
    write_atomic(path, writer.getvalue())


def load_tensor_file(path: PathLike, magic: bytes) -> dict[str, np.ndarray]:
    reader = BinaryReader(read_bytes(path), str(path))
    read_header(reader, magic)
    tensors = read_tensors(reader)
    reader.expect_end()
    return tensors


def encode_sinogram(sino: Sinogram) -> bytes:
    writer = BinaryWriter()
    write_header(writer, SINOGRAM_MAGIC)
    writer.u32(len(sino.angles))
    writer.u32(sino.bins)
    writer.f64(sino.pitch_mm)
    writer.f64_array(np.array(sino.angles.degrees))
    writer.f64_array(sino.values)
    return writer.getvalue()


def decode_sinogram(data: bytes, source: str = "<memory>") -> Sinogram:
    """
    解析正弦图文件

    Raises:
        FormatError: 魔数、版本或长度错误
    """
    reader = BinaryReader(data, source)
    read_header(reader, SINOGRAM_MAGIC)
    count = reader.u32()
    bins = reader.u32()
    pitch = reader.f64()
    angles = reader.f64_array(count)
    values = reader.f64_array(count * bins).reshape(count, bins)
    reader.expect_end()
    try:
        return Sinogram(values, AngleSet(angles), pitch)
    except ValueError as exc:
        raise FormatError(f"正弦图内容无效: {source}: {exc}") from exc


def save_sinogram(path: PathLike, sino: Sinogram) -> None:
    write_atomic(path, encode_sinogram(sino))


def load_sinogram(path: PathLike) -> Sinogram:
    return decode_sinogram(read_bytes(path), str(path))


def encode_image(img: ImageGrid) -> bytes:
    writer = BinaryWriter()
    write_header(writer, IMAGE_MAGIC)
    writer.u32(img.n)
    writer.f64(img.pitch_mm)
    writer.u8(_DOMAIN_CODES[img.domain])
    writer.f64_array(img.values)
    return writer.getvalue()


def decode_image(data: bytes, source: str = "<memory>") -> ImageGrid:
    reader = BinaryReader(data, source)
    read_header(reader, IMAGE_MAGIC)
    n = reader.u32()
    pitch = reader.f64()
    code = reader.u8()
    if code not in _DOMAIN_BY_CODE:
        raise FormatError(f"未知的强度域编码 {code}: {source}")
    values = reader.f64_array(n * n).reshape(n, n)
    reader.expect_end()
    try:
        return ImageGrid(values, pitch, _DOMAIN_BY_CODE[code])
    except ValueError as exc:
        raise FormatError(f"图像内容无效: {source}: {exc}") from exc


def save_image(path: PathLike, img: ImageGrid) -> None:
    write_atomic(path, encode_image(img))


def encode_pgm(pixels: np.ndarray) -> bytes:
    """二进制 8 位灰度 PGM (P5)，最大值 255"""
    if pixels.ndim != 2 or pixels.dtype != np.uint8:
        raise ValueError(f"PGM 需要二维 uint8 数组: {pixels.shape}, {pixels.dtype}")
    height, width = pixels.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(pixels).tobytes()


def write_pgm(path: PathLike, pixels: np.ndarray) -> None:
    write_atomic(path, encode_pgm(pixels))


def decode_pgm(data: bytes, source: str = "<memory>") -> np.ndarray:
    """解析 P5 PGM（支持 # 注释行），仅接受最大值 255"""
    fields: list[bytes] = []
    offset = 0
    while len(fields) < 4:
        while offset < len(data) and data[offset : offset + 1].isspace():
            offset += 1
        if offset < len(data) and data[offset : offset + 1] == b"#":
            while offset < len(data) and data[offset : offset + 1] != b"\n":
                offset += 1
            continue
        start = offset
        while offset < len(data) and not data[offset : offset + 1].isspace():
            offset += 1
        if start == offset:
            raise FormatError(f"PGM 头部不完整: {source}")
        fields.append(data[start:offset])
    offset += 1  # 头部后的单个空白

    if fields[0] != b"P5":
        raise FormatError(f"不是二进制 PGM (P5): {source}")
    try:
        width, height, maxval = (int(f) for f in fields[1:])
    except ValueError:
        raise FormatError(f"PGM 头部无法解析: {source}") from None
    if maxval != 255:
        raise FormatError(f"仅支持最大值 255 的 PGM: {source} (maxval {maxval})")
    body = data[offset:]
    if len(body) < width * height:
        raise FormatError(f"PGM 像素数据被截断: {source}")
    return np.frombuffer(body[: width * height], dtype=np.uint8).reshape(height, width)


def read_pgm(path: PathLike) -> np.ndarray:
    return decode_pgm(read_bytes(path), str(path))


def load_image_file(path: PathLike, pitch_mm: float) -> ImageGrid:
    """
    按文件内容识别并读取图像

    IMGR 文件保留自身的间距和强度域；PGM 像素除以 255 进入归一化域，使用给定间距
    """
    data = read_bytes(path)
    if data.startswith(IMAGE_MAGIC):
        return decode_image(data, str(path))
    if data.startswith(b"P5"):
        pixels = decode_pgm(data, str(path))
        return ImageGrid(pixels.astype(np.float64) / 255.0, pitch_mm)
    raise FormatError(f"无法识别的图像格式: {path}")


def format_value(value: object) -> str:
    """键值文档中的值格式: 浮点数 17 位有效数字，列表逗号分隔"""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, (list, tuple, np.ndarray)):
        return ",".join(format_value(item) for item in value)
    if value is None:
        return "none"
    return str(value)


def format_key_values(items: Iterable[tuple[str, object]]) -> str:
    """每行一个 key = value"""
    return "".join(f"{key} = {format_value(value)}\n" for key, value in items)


def parse_key_values(text: str) -> dict[str, str]:
    """解析 key = value 文档，忽略空行"""
    result: dict[str, str] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        key, sep, value = line.partition(" = ")
        if not sep:
            raise FormatError(f"第 {number} 行不是 key = value 格式: {line!r}")
        result[key.strip()] = value
    return result


def write_key_values(path: PathLike, items: Iterable[tuple[str, object]]) -> None:
    write_atomic(path, format_key_values(items).encode("utf-8"))


def encode_loss_log(records: Sequence[tuple[int, int, float]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(LOSS_LOG_HEADER)
    for epoch, step, loss in records:
        writer.writerow((epoch, step, format(loss, ".17g")))
    return buffer.getvalue()


def write_loss_log(path: PathLike, records: Sequence[tuple[int, int, float]]) -> None:
    """写入 CSV 损失日志，表头 epoch,step,loss"""
    write_atomic(path, encode_loss_log(records).encode("utf-8"))


def read_loss_log(path: PathLike) -> list[tuple[int, int, float]]:
    text = read_bytes(path).decode("utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != LOSS_LOG_HEADER:
        raise FormatError(f"损失日志表头错误: {path}")
    try:
        return [(int(e), int(s), float(v)) for e, s, v in rows[1:]]
    except ValueError as exc:
        raise FormatError(f"损失日志内容无效: {path}: {exc}") from exc
