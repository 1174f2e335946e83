"""
tumorcal: calibration of reaction-diffusion tumor growth models
"""

__version__ = "0.1.0"

from src.grid import Grid2D, ParamPair, ScalarField, build_grid
from src.model import TimeGrid, solve_forward
from src.inverse import CalibrationProblem, ObservationSet, RegOperator
from src.optimizer import NewtonCGConfig, newton_cg

__all__ = [
    "Grid2D",
    "ParamPair",
    "ScalarField",
    "build_grid",
    "TimeGrid",
    "solve_forward",
    "CalibrationProblem",
    "ObservationSet",
    "RegOperator",
    "NewtonCGConfig",
    "newton_cg",
]
