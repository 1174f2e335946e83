"""Inexact Newton-CG calibration"""

from src.optimizer.newton_cg import (
    CalibrationResult,
    NewtonCGConfig,
    NewtonCGSolver,
    armijo_linesearch,
    cg_steihaug,
    newton_cg,
    relative_parameter_error,
)

__all__ = [
    "CalibrationResult",
    "NewtonCGConfig",
    "NewtonCGSolver",
    "armijo_linesearch",
    "cg_steihaug",
    "newton_cg",
    "relative_parameter_error",
]
