"""
稀疏视角 CT 重建实验

从 2 或 4 个投影角度学习重建图像，并与滤波反投影比较
"""

__version__ = "0.1.0"
__description__ = "AUTOMAP 稀疏视角 CT 重建实验"
