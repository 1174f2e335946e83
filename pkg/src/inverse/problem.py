"""
Reduced calibration problem J(theta) shared by the optimizer and the
finite-difference verification suite.

Two parameterizations of the diffusivity are supported:

- ``direct``: optimization variables are (D, G) themselves.
- ``log``: variables are (m_D, G) with D = exp(m_D). Gradients and Hessian
  actions are mapped by the chain rule,
      g_m  = D * g_D
      H_mm = diag(D) H_DD diag(D) + diag(D * g_D),   H_mG = diag(D) H_DG.

Parameters are always carried as physical ParamPairs; a step s in
optimization variables is applied through ``retract``.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from src.errors import ParameterError
from src.grid.field import FieldPair, ParamPair, ScalarField, check_same_grid
from src.inverse.adjoint import (
    AdjointTrajectory,
    CostBreakdown,
    GradientPair,
    assemble_gradient,
    evaluate_cost,
    misfit_gradient,
)
from src.inverse.hessian import HessianContext, apply_hessian, build_hessian_context
from src.inverse.observation import ObservationSet
from src.inverse.regularization import RegOperator
from src.model.forward import StateTrajectory, TimeGrid

logger = logging.getLogger(__name__)

MODES = ("direct", "log")


@dataclass(frozen=True, eq=False)
class Linearization:
    """Everything computed at one parameter point"""

    params: ParamPair
    cost: CostBreakdown
    traj: StateTrajectory
    adj: AdjointTrajectory
    raw_gradient: GradientPair  # w.r.t. (D, G)
    gradient: GradientPair  # w.r.t. the optimization variables
    context: HessianContext


class CalibrationProblem:
    """Cost, gradient and Hessian action of the regularized least-squares problem"""

    def __init__(
        self,
        u0: ScalarField,
        time_grid: TimeGrid,
        obs: ObservationSet,
        regD: RegOperator,
        regG: RegOperator,
        mode: str = "direct",
        misfit_only: bool = False,
    ):
        if mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")
        obs.check_range(time_grid)
        check_same_grid(u0, regD.mean, regG.mean)
        self.u0 = u0
        self.time_grid = time_grid
        self.obs = obs
        self.regD = regD
        self.regG = regG
        self.mode = mode
        self.misfit_only = misfit_only

    # -- parameterization ------------------------------------------------

    def retract(self, params: ParamPair, step: FieldPair, alpha: float) -> ParamPair:
        """Parameters at optimization variables x(params) + alpha * step"""
        sD, sG = step.parts
        if self.mode == "log":
            D = ScalarField(params.D.grid, params.D.values * np.exp(alpha * sD.values))
            return ParamPair(D=D, G=params.G + alpha * sG)
        return params.shifted(step, alpha)

    def trial_min_diffusivity(self, params: ParamPair, step: FieldPair, alpha: float) -> float:
        """min D at the trial point, without constructing it"""
        sD = step.parts[0].values
        if self.mode == "log":
            return float(np.min(params.D.values * np.exp(alpha * sD)))
        return float(np.min(params.D.values + alpha * sD))

    def _to_variables(self, params: ParamPair, g: GradientPair) -> GradientPair:
        if self.mode == "log":
            return GradientPair(params.D * g.gD, g.gG)
        return g

    # -- evaluations -------------------------------------------------------

    def cost(self, params: ParamPair) -> CostBreakdown:
        breakdown, _ = evaluate_cost(
            params, self.u0, self.time_grid, self.obs, self.regD, self.regG
        )
        if self.misfit_only:
            return CostBreakdown(breakdown.misfit, breakdown.misfit, 0.0, 0.0)
        return breakdown

    def linearize(self, params: ParamPair, gauss_newton: bool = False) -> Linearization:
        """Forward + adjoint solve, gradient, and frozen Hessian context"""
        breakdown, traj = evaluate_cost(
            params, self.u0, self.time_grid, self.obs, self.regD, self.regG
        )
        ctx = build_hessian_context(params, traj, self.obs, self.regD, self.regG, gauss_newton)
        if self.misfit_only:
            raw = misfit_gradient(traj, ctx.adj)
            breakdown = CostBreakdown(breakdown.misfit, breakdown.misfit, 0.0, 0.0)
        else:
            raw = assemble_gradient(traj, ctx.adj, params, self.regD, self.regG)
        return Linearization(
            params=params,
            cost=breakdown,
            traj=traj,
            adj=ctx.adj,
            raw_gradient=raw,
            gradient=self._to_variables(params, raw),
            context=ctx,
        )

    def gradient(self, params: ParamPair) -> GradientPair:
        return self.linearize(params).gradient

    def hessian_apply(
        self,
        lin: Linearization,
        direction: FieldPair,
        gauss_newton: Optional[bool] = None,
    ) -> GradientPair:
        """H direction in optimization variables"""
        ctx = lin.context
        if gauss_newton is not None and gauss_newton != ctx.gauss_newton:
            ctx = ctx.with_gauss_newton(gauss_newton)
        sD, sG = direction.parts

        if self.mode == "log":
            D = lin.params.D
            H = apply_hessian(ctx, D * sD, sG, misfit_only=self.misfit_only)
            return GradientPair(D * H.gD + D * lin.raw_gradient.gD * sD, H.gG)
        return apply_hessian(ctx, sD, sG, misfit_only=self.misfit_only)

    def hessian_operator(
        self, lin: Linearization, gauss_newton: Optional[bool] = None
    ) -> Callable[[FieldPair], GradientPair]:
        return lambda direction: self.hessian_apply(lin, direction, gauss_newton)

    def regularization_preconditioner(self) -> Callable[[FieldPair], GradientPair]:
        """Apply (A_D^-2, A_G^-2), the inverse of the regularization Hessian block"""

        def apply(residual: FieldPair) -> GradientPair:
            rD, rG = residual.parts
            return GradientPair(
                self.regD.apply_inverse_square(rD), self.regG.apply_inverse_square(rG)
            )

        return apply
