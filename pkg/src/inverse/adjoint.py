"""
Adjoint solve, gradient assembly, and total cost

Discrete-adjoint arrangement: with step residuals
F_k = (u_k - u_{k-1})/dt - L_D u_k - G (1 - u_k) u_k, k = 1..Nt,
the multiplier of F_k is stored as adjoint snapshot p_{k-1}, and p_Nt = 0.
Backward in time,

    J_k p_{k-1} = p_k / dt - s_k / dt,   s_k = (1/sigma^2) B*B(u_k - d_k),

where J_k is the (symmetric) Newton Jacobian of step k at its converged
state. The gradient pairs u_k with p_{k-1}:

    g_D = A_D^2 (D - mean_D) + sum_k dt * gradu_k . gradp_{k-1}
    g_G = A_G^2 (G - mean_G) - sum_k dt * p_{k-1} (u_k - u_k^2)

which is the exact derivative of the discrete cost.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.errors import GridMismatchError, ParameterError
from src.grid.field import GradientPair, ParamPair, ScalarField
from src.grid.operators import flux_pairing
from src.inverse.observation import ObservationSet, misfit_cost, obs_adjoint_source
from src.inverse.regularization import RegOperator, reg_cost, reg_grad
from src.model.forward import (
    LinearizedSteps,
    StateTrajectory,
    TimeGrid,
    Trajectory,
    solve_forward,
)

logger = logging.getLogger(__name__)


class AdjointTrajectory(Trajectory):
    """Adjoint snapshots p_0..p_Nt with p_Nt = 0; p_0 is the initial-condition multiplier"""

    def __init__(self, time_grid: TimeGrid, snapshots):
        super().__init__(time_grid, snapshots)
        if np.any(self.snapshots[-1].values != 0):
            raise ParameterError("adjoint terminal snapshot must be zero")

    @property
    def p0(self) -> ScalarField:
        return self.snapshots[0]


@dataclass(frozen=True)
class CostBreakdown:
    total: float
    misfit: float
    reg_D: float
    reg_G: float


def evaluate_cost(
    params: ParamPair,
    u0: ScalarField,
    time_grid: TimeGrid,
    obs: ObservationSet,
    regD: RegOperator,
    regG: RegOperator,
) -> Tuple[CostBreakdown, StateTrajectory]:
    """Forward solve and cost components at params"""
    traj = solve_forward(params, u0, time_grid)
    misfit = misfit_cost(traj, obs)
    rD = reg_cost(params.D, regD)
    rG = reg_cost(params.G, regG)
    return CostBreakdown(total=misfit + rD + rG, misfit=misfit, reg_D=rD, reg_G=rG), traj


def total_cost(
    params: ParamPair,
    u0: ScalarField,
    time_grid: TimeGrid,
    obs: ObservationSet,
    regD: RegOperator,
    regG: RegOperator,
) -> float:
    """J(D, G) = misfit + R_D + R_G"""
    breakdown, _ = evaluate_cost(params, u0, time_grid, obs, regD, regG)
    return breakdown.total


def solve_adjoint(
    traj: StateTrajectory,
    params: ParamPair,
    obs: ObservationSet,
    steps: Optional[LinearizedSteps] = None,
) -> AdjointTrajectory:
    """Backward sweep with the transposed step operators"""
    steps = steps or LinearizedSteps(traj, params)
    tg = traj.time_grid
    dt = tg.dt
    grid = traj.grid

    p = [None] * (tg.Nt + 1)
    p[tg.Nt] = ScalarField.zeros(grid)
    for k in range(tg.Nt, 0, -1):
        rhs = p[k].values / dt
        if obs.index_of(k) is not None:
            rhs = rhs - obs_adjoint_source(traj, obs, k).values / dt
        p[k - 1] = ScalarField(grid, steps.solve(k, rhs))

    return AdjointTrajectory(tg, p)


def _check_consistent(traj: Trajectory, adj: Trajectory, params: ParamPair):
    if traj.time_grid != adj.time_grid:
        raise ParameterError("state and adjoint trajectories use different time grids")
    if not (traj.grid.matches(adj.grid) and traj.grid.matches(params.D.grid)):
        raise GridMismatchError("state, adjoint and parameters live on different grids")


def misfit_gradient(traj: StateTrajectory, adj: AdjointTrajectory) -> GradientPair:
    """Data-misfit part of the gradient (the sums over time steps)"""
    dt = traj.time_grid.dt
    grid = traj.grid
    gD = np.zeros(grid.n_active)
    gG = np.zeros(grid.n_active)
    for k in range(1, traj.time_grid.Nt + 1):
        u, p = traj[k], adj[k - 1]
        gD += dt * flux_pairing(u, p).values
        gG -= dt * p.values * (u.values - u.values**2)
    return GradientPair(ScalarField(grid, gD), ScalarField(grid, gG))


def assemble_gradient(
    traj: StateTrajectory,
    adj: AdjointTrajectory,
    params: ParamPair,
    regD: RegOperator,
    regG: RegOperator,
) -> GradientPair:
    """Full gradient (g_D, g_G) from a consistent forward/adjoint pair"""
    _check_consistent(traj, adj, params)
    misfit = misfit_gradient(traj, adj)
    return GradientPair(
        gD=reg_grad(params.D, regD) + misfit.gD,
        gG=reg_grad(params.G, regG) + misfit.gG,
    )
