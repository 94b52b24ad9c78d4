"""
用户界面模块
"""

from .console_renderer import ConsoleRenderer
from .grid_renderer import compose_grid, render_grid, window_to_bytes

__all__ = ["ConsoleRenderer", "compose_grid", "render_grid", "window_to_bytes"]
