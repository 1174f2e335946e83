"""Forward reaction-diffusion model and sparse linear solves"""

from src.model.forward import (
    LinearizedSteps,
    StateTrajectory,
    TimeGrid,
    Trajectory,
    gaussian_bump,
    solve_forward,
    step_implicit,
)
from src.model.linear_solver import LinearSolver

__all__ = [
    "LinearizedSteps",
    "StateTrajectory",
    "TimeGrid",
    "Trajectory",
    "gaussian_bump",
    "solve_forward",
    "step_implicit",
    "LinearSolver",
]
