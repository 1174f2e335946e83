"""Masked structured grids, scalar fields and discrete operators"""

from src.grid.grid import Grid2D, build_grid, disk_mask, square_mask
from src.grid.field import FieldPair, GradientPair, ParamPair, ScalarField, inner, smooth_field
from src.grid.operators import (
    apply_diffusion,
    apply_elliptic,
    diffusion_matrix,
    elliptic_matrix,
    flux_pairing,
)

__all__ = [
    "Grid2D",
    "build_grid",
    "disk_mask",
    "square_mask",
    "ScalarField",
    "ParamPair",
    "FieldPair",
    "GradientPair",
    "inner",
    "smooth_field",
    "apply_diffusion",
    "apply_elliptic",
    "diffusion_matrix",
    "elliptic_matrix",
    "flux_pairing",
]
