"""
评估模块
指标、报告与运行评估
"""

from .metrics import (
    FalseDigitResult,
    body_outline_iou,
    check_oracle_gate,
    false_digit_rate,
    hu_rmse,
    rmse,
)
from .report import EvalReport, read_report
from .evaluator import evaluate_run, fbp_from_vector

__all__ = [
    "FalseDigitResult",
    "body_outline_iou",
    "check_oracle_gate",
    "false_digit_rate",
    "hu_rmse",
    "rmse",
    "EvalReport",
    "read_report",
    "evaluate_run",
    "fbp_from_vector",
]
