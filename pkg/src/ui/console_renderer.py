"""
控制台渲染器
负责在控制台逐行显示运行进度和结果
"""

import os
import sys
from typing import Any, Iterable, TextIO, Union


class ConsoleRenderer:
    """
    控制台渲染器类

    只做逐行输出，不清屏，不画进度条
    """

    def __init__(self, stream: TextIO | None = None, quiet: bool = False):
        self.width = 80
        self.separator = "=" * self.width
        self.stream = stream if stream is not None else sys.stdout
        self.quiet = quiet

    def _print(self, text: str = "") -> None:
        if not self.quiet:
            print(text, file=self.stream)

    def render_title(self, title: str):
        """渲染标题栏"""
        self._print(self.separator)
        self._print(title.center(self.width))
        self._print(self.separator)

    def render_info(self, message: str):
        """渲染一般信息"""
        self._print(f"ℹ️  {message}")

    def render_epoch(self, epoch: int, total: int, mean_loss: float):
        """
        渲染一轮训练的结果

        Args:
            epoch: 已完成的轮数
            total: 总轮数
            mean_loss: 本轮平均损失
        """
        self._print(f"🔄 第{epoch}/{total}轮  平均损失: {mean_loss:.6e}")

    def render_checkpoint(self, directory: Union[str, os.PathLike], epoch: int):
        """渲染检查点写出信息"""
        self._print(f"💾 检查点已保存 (第{epoch}轮): {directory}")

    def render_report(self, title: str, items: Iterable[tuple[str, Any]]):
        """
        渲染结果报告

        Args:
            title: 报告标题
            items: (键, 值) 列表
        """
        self._print(self.separator)
        self._print(f"📊 {title}")
        self._print("-" * self.width)
        for key, value in items:
            if isinstance(value, float):
                value = f"{value:.6g}"
            self._print(f"   {key}: {value}")
        self._print(self.separator)

    def render_artifact(self, label: str, path: Union[str, os.PathLike]):
        """渲染产出文件路径"""
        self._print(f"📁 {label}: {path}")

    def render_error(self, message: str):
        """渲染错误信息（写到标准错误）"""
        print(f"❌ 错误: {message}", file=sys.stderr)
