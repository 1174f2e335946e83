"""
Hessian-vector products by second-order adjoints

For a direction (Dh, Gh) the incremental state uh and incremental adjoint ph
solve, with the step operators J_k of the forward trajectory,

    J_k uh_k     = uh_{k-1}/dt + L_Dh u_k + Gh (u_k - u_k^2),           uh_0 = 0
    J_k ph_{k-1} = ph_k/dt - (1/(sigma^2 dt)) B*B uh_k
                   + L_Dh p_{k-1} + Gh (1 - 2u_k) p_{k-1} - 2 G uh_k p_{k-1},  ph_Nt = 0

and the Hessian action is

    H_D = A_D^2 Dh + sum_k dt (gradu_k . gradph_{k-1} + graduh_k . gradp_{k-1})
    H_G = A_G^2 Gh - sum_k dt (ph_{k-1} (u_k - u_k^2) + p_{k-1} uh_k (1 - 2u_k))

The Gauss-Newton variant drops every term carrying the adjoint p.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from src.errors import ParameterError
from src.grid.field import FieldPair, ParamPair, ScalarField, check_same_grid
from src.grid.operators import apply_diffusion, flux_pairing
from src.inverse.adjoint import AdjointTrajectory, GradientPair, solve_adjoint
from src.inverse.observation import ObservationSet
from src.inverse.regularization import RegOperator, reg_hess_apply
from src.model.forward import LinearizedSteps, StateTrajectory, Trajectory

logger = logging.getLogger(__name__)


def reaction_curvature(G: np.ndarray) -> np.ndarray:
    """d^2/du^2 of the reaction G u (1 - u)"""
    return -2.0 * G


@dataclass(frozen=True, eq=False)
class HessianContext:
    """Frozen linearization point: parameters, state, adjoint, data, regularization"""

    params: ParamPair
    traj: StateTrajectory
    adj: AdjointTrajectory
    obs: ObservationSet
    regD: RegOperator
    regG: RegOperator
    gauss_newton: bool = False
    steps: Optional[LinearizedSteps] = field(default=None, repr=False)

    def __post_init__(self):
        if self.traj.time_grid != self.adj.time_grid:
            raise ParameterError("state and adjoint trajectories use different time grids")
        check_same_grid(self.params.D, self.traj[0], self.adj[0])
        if self.steps is None:
            object.__setattr__(self, "steps", LinearizedSteps(self.traj, self.params))

    def with_gauss_newton(self, gauss_newton: bool) -> "HessianContext":
        """Same linearization point (and cached step solvers), other Hessian variant"""
        return HessianContext(
            self.params,
            self.traj,
            self.adj,
            self.obs,
            self.regD,
            self.regG,
            gauss_newton,
            self.steps,
        )


def build_hessian_context(
    params: ParamPair,
    traj: StateTrajectory,
    obs: ObservationSet,
    regD: RegOperator,
    regG: RegOperator,
    gauss_newton: bool = False,
) -> HessianContext:
    """Solve the adjoint at (traj, params) and freeze everything for Hessian products"""
    steps = LinearizedSteps(traj, params)
    adj = solve_adjoint(traj, params, obs, steps)
    return HessianContext(params, traj, adj, obs, regD, regG, gauss_newton, steps)


def solve_incremental_forward(
    ctx: HessianContext, dhat: ScalarField, ghat: ScalarField
) -> Trajectory:
    """Incremental state uh (linear in the direction), uh_0 = 0"""
    check_same_grid(dhat, ghat, ctx.params.D)
    tg = ctx.traj.time_grid
    dt = tg.dt
    grid = ctx.traj.grid

    uhat = [ScalarField.zeros(grid)]
    for k in range(1, tg.Nt + 1):
        u = ctx.traj[k]
        source = apply_diffusion(dhat, u).values + ghat.values * (u.values - u.values**2)
        rhs = uhat[-1].values / dt + source
        uhat.append(ScalarField(grid, ctx.steps.solve(k, rhs)))
    return Trajectory(tg, uhat)


def solve_incremental_adjoint(
    ctx: HessianContext, dhat: ScalarField, ghat: ScalarField, uhat: Trajectory
) -> Trajectory:
    """Incremental adjoint ph backward from ph_Nt = 0"""
    check_same_grid(dhat, ghat, ctx.params.D, uhat[0])
    tg = ctx.traj.time_grid
    dt = tg.dt
    grid = ctx.traj.grid
    obs = ctx.obs
    G = ctx.params.G.values

    phat = [None] * (tg.Nt + 1)
    phat[tg.Nt] = ScalarField.zeros(grid)
    for k in range(tg.Nt, 0, -1):
        rhs = phat[k].values / dt
        idx = obs.index_of(k)
        if idx is not None:
            observed = obs.restrict(idx, obs.restrict(idx, uhat[k]))
            rhs = rhs - observed.values / (obs.sigma_noise**2 * dt)
        if not ctx.gauss_newton:
            u = ctx.traj[k].values
            p = ctx.adj[k - 1]
            rhs = (
                rhs
                + apply_diffusion(dhat, p).values
                + ghat.values * (1.0 - 2.0 * u) * p.values
                + reaction_curvature(G) * uhat[k].values * p.values
            )
        phat[k - 1] = ScalarField(grid, ctx.steps.solve(k, rhs))
    return Trajectory(tg, phat)


def apply_hessian(
    ctx: HessianContext,
    dhat: ScalarField,
    ghat: ScalarField,
    misfit_only: bool = False,
) -> GradientPair:
    """Hessian action (H_D, H_G) on the direction (dhat, ghat)"""
    uhat = solve_incremental_forward(ctx, dhat, ghat)
    phat = solve_incremental_adjoint(ctx, dhat, ghat, uhat)

    tg = ctx.traj.time_grid
    dt = tg.dt
    grid = ctx.traj.grid
    HD = np.zeros(grid.n_active)
    HG = np.zeros(grid.n_active)
    for k in range(1, tg.Nt + 1):
        u, uh, ph = ctx.traj[k], uhat[k], phat[k - 1]
        HD += dt * flux_pairing(u, ph).values
        HG -= dt * ph.values * (u.values - u.values**2)
        if not ctx.gauss_newton:
            p = ctx.adj[k - 1]
            HD += dt * flux_pairing(uh, p).values
            HG -= dt * p.values * uh.values * (1.0 - 2.0 * u.values)

    result = GradientPair(ScalarField(grid, HD), ScalarField(grid, HG))
    if misfit_only:
        return result
    return result + GradientPair(reg_hess_apply(dhat, ctx.regD), reg_hess_apply(ghat, ctx.regG))


def hessian_operator(ctx: HessianContext, misfit_only: bool = False):
    """Wrap apply_hessian as a map on direction pairs"""

    def apply(direction: FieldPair) -> GradientPair:
        dhat, ghat = direction.parts
        return apply_hessian(ctx, dhat, ghat, misfit_only=misfit_only)

    return apply
