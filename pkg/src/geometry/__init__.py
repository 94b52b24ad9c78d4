"""
平行束几何模块
"""

from .radon import (
    backproject,
    fbp_reconstruct,
    filter_projections,
    forward_project,
    normalize_projections,
    normalize_sinogram,
    project_batch,
    ram_lak_response,
    system_matrix,
)

__all__ = [
    "backproject",
    "fbp_reconstruct",
    "filter_projections",
    "forward_project",
    "normalize_projections",
    "normalize_sinogram",
    "project_batch",
    "ram_lak_response",
    "system_matrix",
]
