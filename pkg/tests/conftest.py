"""
Shared small problems for the test suite
"""

import numpy as np
import pytest

from src.grid.field import ParamPair, ScalarField, smooth_field
from src.grid.grid import build_grid, disk_mask, square_mask
from src.inverse.observation import generate_synthetic
from src.inverse.problem import CalibrationProblem
from src.inverse.regularization import RegOperator
from src.model.forward import TimeGrid, gaussian_bump


@pytest.fixture
def square_grid():
    """6x5 full grid with unequal spacings"""
    return build_grid(square_mask(6, 5), 1.0, 0.8)


@pytest.fixture
def disk_grid():
    """12x12 disk, unit spacing"""
    return build_grid(disk_mask(12, 5.5), 1.0, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def time_grid():
    return TimeGrid(T=2.0, Nt=8)


@pytest.fixture
def u0(disk_grid):
    return gaussian_bump(disk_grid, (6.0, 6.0), 2.0, 0.5)


@pytest.fixture
def truth(disk_grid):
    return ParamPair(
        D=smooth_field(disk_grid, 1.0, 0.3, seed=1),
        G=smooth_field(disk_grid, 0.3, 0.1, seed=2),
    )


@pytest.fixture
def regs(disk_grid):
    return (
        RegOperator(0.1, 0.1, ScalarField.constant(disk_grid, 1.0)),
        RegOperator(0.1, 0.1, ScalarField.constant(disk_grid, 0.3)),
    )


@pytest.fixture
def noisy_obs(truth, u0, time_grid):
    return generate_synthetic(truth, u0, time_grid, (4, 8), sigma=0.05, seed=0)


@pytest.fixture
def problem(u0, time_grid, noisy_obs, regs):
    """Noisy two-observation problem on the small disk"""
    regD, regG = regs
    return CalibrationProblem(u0, time_grid, noisy_obs, regD, regG)


@pytest.fixture
def base_point(truth):
    """A point away from the optimum"""
    return ParamPair(D=truth.D * 1.3, G=truth.G * 0.7)


@pytest.fixture
def clean_obs(truth, u0, time_grid):
    return generate_synthetic(truth, u0, time_grid, (4, 8), sigma=0.0, seed=0)


@pytest.fixture
def calibration_problem(u0, time_grid, clean_obs, regs):
    """Noiseless two-observation problem; its minimizer sits near the truth"""
    regD, regG = regs
    return CalibrationProblem(u0, time_grid, clean_obs, regD, regG)
