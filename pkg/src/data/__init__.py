"""
数据模块
MNIST 读取、缩放、划分协议、体模生成与强度映射
"""

from .intensity import (
    hu_array_to_normalized,
    hu_to_normalized,
    normalized_array_to_hu,
    normalized_to_hu,
)
from .resize import resize_batch, resize_bilinear
from .records import DatasetSplit, ImageCollection, LabeledImage
from .mnist import find_mnist_files, load_mnist, read_idx_images, read_idx_labels
from .splits import (
    split_exclude_digit,
    split_random,
    split_random_sized,
    subsample_split,
)
from .phantom import (
    Ellipse,
    PhantomSpec,
    generate_phantom,
    generate_phantom_set,
    write_phantom_set,
)

__all__ = [
    "hu_array_to_normalized",
    "hu_to_normalized",
    "normalized_array_to_hu",
    "normalized_to_hu",
    "resize_batch",
    "resize_bilinear",
    "DatasetSplit",
    "ImageCollection",
    "LabeledImage",
    "find_mnist_files",
    "load_mnist",
    "read_idx_images",
    "read_idx_labels",
    "split_exclude_digit",
    "split_random",
    "split_random_sized",
    "subsample_split",
    "Ellipse",
    "PhantomSpec",
    "generate_phantom",
    "generate_phantom_set",
    "write_phantom_set",
]
