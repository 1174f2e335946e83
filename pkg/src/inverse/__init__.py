"""Observations, regularization, adjoint gradients and Hessian actions"""

from src.inverse.observation import ObservationSet, generate_synthetic, misfit_cost
from src.inverse.regularization import RegOperator, reg_cost, reg_grad, reg_hess_apply
from src.inverse.adjoint import (
    AdjointTrajectory,
    CostBreakdown,
    GradientPair,
    assemble_gradient,
    solve_adjoint,
    total_cost,
)
from src.inverse.hessian import HessianContext, apply_hessian, build_hessian_context
from src.inverse.problem import CalibrationProblem, Linearization

__all__ = [
    "ObservationSet",
    "generate_synthetic",
    "misfit_cost",
    "RegOperator",
    "reg_cost",
    "reg_grad",
    "reg_hess_apply",
    "AdjointTrajectory",
    "CostBreakdown",
    "GradientPair",
    "assemble_gradient",
    "solve_adjoint",
    "total_cost",
    "HessianContext",
    "apply_hessian",
    "build_hessian_context",
    "CalibrationProblem",
    "Linearization",
]
