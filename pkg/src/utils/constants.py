"""
常量定义模块
定义重建实验中使用的枚举类型和常量
"""

from enum import Enum


class IntensityDomain(Enum):
    """强度域枚举"""

    NORMALIZED = "normalized"  # 归一化 [0, 1]
    HOUNSFIELD = "hounsfield"  # HU值


class AnglePreset(Enum):
    """投影角度预设"""

    FOUR_VIEW = "four_view"  # 0°, 45°, 90°, 135°
    TWO_VIEW = "two_view"  # 0°, 90°


class Mode(Enum):
    """网络运行模式"""

    TRAIN = "train"
    EVAL = "eval"


class ModelPreset(Enum):
    """模型规模预设"""

    FULL = "full"  # n=64
    SMALL = "small"  # n=32，用于测试


class Experiment(Enum):
    """实验类型"""

    MNIST_RANDOM = "mnist_random"
    MNIST_EXCLUDE = "mnist_exclude"
    PHANTOM = "phantom"


class SplitProtocol(Enum):
    """数据划分协议"""

    RANDOM = "random"
    EXCLUDE_DIGIT = "exclude_digit"


# 预设角度（度）
PRESET_ANGLES = {
    AnglePreset.FOUR_VIEW: (0.0, 45.0, 90.0, 135.0),
    AnglePreset.TWO_VIEW: (0.0, 90.0),
}

# 几何常量
DEFAULT_PITCH_MM = 5.0
IMAGE_SIZE = 64
MNIST_SIZE = 28

# HU 范围
HU_MIN = -1000.0
HU_MAX = 2000.0
HU_SPAN = HU_MAX - HU_MIN
HU_AIR = -1000.0

# MNIST 划分
MNIST_USED_COUNT = 48000
RANDOM_TRAIN_COUNT = 43000
RANDOM_TEST_COUNT = 5000
DEFAULT_EXCLUDED_DIGIT = 2

# 批归一化
BN_EPSILON = 1e-5
BN_MOMENTUM = 0.99

# 矩阵乘法固定分块行数
MATMUL_ROW_TILE = 32

# 数字判别器
ORACLE_HIDDEN = 256
ORACLE_CLASSES = 10
ORACLE_MIN_ACCURACY = 0.95
ORACLE_HELDOUT_COUNT = 5000

# 文件魔数
SINOGRAM_MAGIC = b"SINO"
IMAGE_MAGIC = b"IMGR"
WEIGHTS_MAGIC = b"AMAP"
OPTIMIZER_MAGIC = b"AOPT"
ORACLE_MAGIC = b"AORC"
IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
FORMAT_VERSION = 1

# 退出码
EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_NUMERIC_ERROR = 3
EXIT_IO_ERROR = 4
