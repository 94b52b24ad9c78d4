"""
服务模块
文件格式的读写
"""

from .formats import (
    BinaryReader,
    BinaryWriter,
    format_key_values,
    load_image_file,
    load_sinogram,
    load_tensor_file,
    parse_key_values,
    read_loss_log,
    read_pgm,
    save_image,
    save_sinogram,
    save_tensor_file,
    write_key_values,
    write_loss_log,
    write_pgm,
)

__all__ = [
    "BinaryReader",
    "BinaryWriter",
    "format_key_values",
    "load_image_file",
    "load_sinogram",
    "load_tensor_file",
    "parse_key_values",
    "read_loss_log",
    "read_pgm",
    "save_image",
    "save_sinogram",
    "save_tensor_file",
    "write_key_values",
    "write_loss_log",
    "write_pgm",
]
