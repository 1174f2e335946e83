"""
Forward reaction-diffusion solver

    du/dt = div(D grad u) + G (1 - u) u   in the domain, zero flux on its boundary

Implicit Euler in time; each step solves the nonlinear residual

    (u - u_prev)/dt - L_D u - G (1 - u) u = 0

by Newton's method with Jacobian J(u) = I/dt - L_D - diag(G (1 - 2u)).
The same J, evaluated at the converged state of each step, is the step
operator of the adjoint and incremental problems.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterator, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sps

from src.config import Config
from src.errors import GridMismatchError, ParameterError, TimestepDivergedError
from src.grid.field import ParamPair, ScalarField, check_same_grid
from src.grid.grid import Grid2D
from src.grid.operators import diffusion_matrix
from src.model.linear_solver import LinearSolver

logger = logging.getLogger(__name__)

# Discrete relaxation of the [0, 1] range of the volume fraction
BOUNDS_TOLERANCE = 1e-6


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid on [0, T] with Nt steps"""

    T: float
    Nt: int

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0):
            raise ParameterError(f"final time T must be positive, got {self.T}")
        if int(self.Nt) != self.Nt or self.Nt < 1:
            raise ParameterError(f"number of steps Nt must be a positive integer, got {self.Nt}")
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "Nt", int(self.Nt))

    @property
    def dt(self) -> float:
        return self.T / self.Nt

    def time(self, k: int) -> float:
        return k * self.T / self.Nt

    def times(self) -> np.ndarray:
        return np.array([self.time(k) for k in range(self.Nt + 1)])


class Trajectory:
    """Time-indexed sequence of fields on one grid, snapshots 0..Nt"""

    def __init__(self, time_grid: TimeGrid, snapshots: Sequence[ScalarField]):
        snapshots = tuple(snapshots)
        if len(snapshots) != time_grid.Nt + 1:
            raise ParameterError(
                f"trajectory needs {time_grid.Nt + 1} snapshots, got {len(snapshots)}"
            )
        check_same_grid(*snapshots)
        self.time_grid = time_grid
        self.snapshots = snapshots

    @property
    def grid(self) -> Grid2D:
        return self.snapshots[0].grid

    @property
    def final(self) -> ScalarField:
        return self.snapshots[-1]

    def __len__(self) -> int:
        return len(self.snapshots)

    def __getitem__(self, k: int) -> ScalarField:
        return self.snapshots[k]

    def __iter__(self) -> Iterator[ScalarField]:
        return iter(self.snapshots)


class StateTrajectory(Trajectory):
    """Forward solution u_0..u_Nt"""

    def bounds(self) -> Tuple[float, float]:
        return (
            min(s.min() for s in self.snapshots),
            max(s.max() for s in self.snapshots),
        )

    def within_bounds(self, tol: float = BOUNDS_TOLERANCE) -> bool:
        lo, hi = self.bounds()
        return lo >= -tol and hi <= 1.0 + tol

    def peak(self) -> ScalarField:
        """Cellwise max over time"""
        stacked = np.stack([s.values for s in self.snapshots])
        return ScalarField(self.grid, stacked.max(axis=0))


def step_jacobian(
    L: sps.spmatrix, G: ScalarField, u: ScalarField, dt: float
) -> Tuple[sps.csr_matrix, bool]:
    """J = I/dt - L_D - diag(G (1 - 2u)) and whether it is positive definite

    -L_D is positive semidefinite for D >= 0, so J is SPD whenever the
    diagonal shift 1/dt - G (1 - 2u) is positive everywhere.
    """
    reaction = G.values * (1.0 - 2.0 * u.values)
    n = u.grid.n_active
    J = sps.identity(n, format="csr") / dt - L - sps.diags(reaction)
    spd = bool(np.all(1.0 / dt - reaction > 0))
    return J.tocsr(), spd


def _residual(
    L: sps.spmatrix, G: np.ndarray, u: np.ndarray, u_prev: np.ndarray, dt: float
) -> np.ndarray:
    return (u - u_prev) / dt - L @ u - G * (1.0 - u) * u


def _implicit_step(
    L: sps.spmatrix,
    u_prev: ScalarField,
    G: ScalarField,
    dt: float,
    step: Optional[int] = None,
    time: Optional[float] = None,
) -> ScalarField:
    grid = u_prev.grid
    scale = np.sqrt(grid.cell_area)
    tol = Config.NEWTON_RTOL * (1.0 + u_prev.norm())
    u = u_prev.values.copy()
    rnorm = float("nan")

    for it in range(Config.NEWTON_MAX_ITERS + 1):
        R = _residual(L, G.values, u, u_prev.values, dt)
        rnorm = float(np.linalg.norm(R) * scale)
        if not np.isfinite(rnorm):
            break
        if rnorm <= tol:
            logger.debug("step %s converged in %d Newton iterations (|R|=%.2e)", step, it, rnorm)
            return ScalarField(grid, u)
        if it == Config.NEWTON_MAX_ITERS:
            break
        J, spd = step_jacobian(L, G, ScalarField(grid, u), dt)
        u = u + LinearSolver(J, spd).solve(-R)

    raise TimestepDivergedError(
        step=step, time=time, iterations=Config.NEWTON_MAX_ITERS, residual=rnorm
    )


def step_implicit(
    u_prev: ScalarField,
    params: ParamPair,
    dt: float,
    step: Optional[int] = None,
    time: Optional[float] = None,
) -> ScalarField:
    """Advance u_prev by one implicit Euler step of length dt"""
    if not dt > 0:
        raise ParameterError(f"timestep must be positive, got {dt}")
    check_same_grid(u_prev, params.D, params.G)
    return _implicit_step(diffusion_matrix(params.D), u_prev, params.G, dt, step, time)


def solve_forward(
    params: ParamPair, u0: ScalarField, time_grid: TimeGrid
) -> StateTrajectory:
    """March the forward problem from u0 over time_grid, storing every snapshot"""
    check_same_grid(u0, params.D, params.G)
    if u0.min() < 0 or u0.max() > 1:
        raise ParameterError(
            f"initial condition must lie in [0, 1], got [{u0.min():g}, {u0.max():g}]"
        )

    L = diffusion_matrix(params.D)
    dt = time_grid.dt
    snapshots = [u0]
    for k in range(1, time_grid.Nt + 1):
        snapshots.append(
            _implicit_step(L, snapshots[-1], params.G, dt, step=k, time=time_grid.time(k))
        )

    traj = StateTrajectory(time_grid, snapshots)
    if not traj.within_bounds():
        lo, hi = traj.bounds()
        logger.warning("state left [0, 1] beyond tolerance: range [%.3e, %.3e]", lo, hi)
    logger.debug("forward solve done: %d steps, final mass %.6e", time_grid.Nt, traj.final.total())
    return traj


class LinearizedSteps:
    """Step operators J_k, k = 1..Nt, linearized at a converged trajectory

    J_k is symmetric, so it also serves as the transposed operator of the
    backward (adjoint) sweeps. Solvers are built lazily and cached.
    """

    def __init__(self, traj: StateTrajectory, params: ParamPair):
        if not traj.grid.matches(params.D.grid):
            raise GridMismatchError("trajectory and parameters live on different grids")
        self.traj = traj
        self.params = params
        self.dt = traj.time_grid.dt
        self._L = diffusion_matrix(params.D)
        self._solvers: Dict[int, LinearSolver] = {}

    def solver(self, k: int) -> LinearSolver:
        if k not in self._solvers:
            J, spd = step_jacobian(self._L, self.params.G, self.traj[k], self.dt)
            self._solvers[k] = LinearSolver(J, spd)
        return self._solvers[k]

    def solve(self, k: int, rhs: np.ndarray) -> np.ndarray:
        return self.solver(k).solve(rhs)


def gaussian_bump(
    grid: Grid2D, center: Tuple[float, float], width: float, amplitude: float
) -> ScalarField:
    """amplitude * exp(-|x - center|^2 / (2 width^2)) at cell centers"""
    if not 0 <= amplitude <= 1:
        raise ParameterError(f"bump amplitude must lie in [0, 1], got {amplitude}")
    if not width > 0:
        raise ParameterError(f"bump width must be positive, got {width}")
    cx, cy = center
    return ScalarField.from_function(
        grid,
        lambda x, y: amplitude * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2.0 * width**2)),
    )
