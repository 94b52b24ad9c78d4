"""
错误类型定义
"""


class ShapeError(ValueError):
    """张量形状不匹配"""


class DomainError(ValueError):
    """强度域不匹配或取值越界"""


class ConfigError(ValueError):
    """配置无效"""


class FormatError(ValueError):
    """文件格式错误（魔数、版本、截断）"""


class NumericError(ArithmeticError):
    """数值失败（出现 NaN/Inf）"""

    def __init__(self, message: str, name: str | None = None):
        super().__init__(message)
        self.name = name


class OracleGateError(RuntimeError):
    """数字判别器未达到准确率门槛"""
