"""Finite-difference and symmetry checks of derivatives"""

from src.verification.fd_checks import (
    DEFAULT_EPSILONS,
    FDCheckReport,
    fd_gradient_check,
    fd_hessian_check,
    fit_decay,
    hessian_symmetry_check,
    random_direction,
)

__all__ = [
    "DEFAULT_EPSILONS",
    "FDCheckReport",
    "fd_gradient_check",
    "fd_hessian_check",
    "fit_decay",
    "hessian_symmetry_check",
    "random_direction",
]
