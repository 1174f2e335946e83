"""
Tikhonov regularization R(m) = 1/2 ||A (m - mean)||^2 with
A m = -div(gamma grad m) + delta m (zero-flux boundary)
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse.linalg as spla

from src.errors import ParameterError
from src.grid.field import ScalarField, check_same_grid, inner
from src.grid.operators import apply_elliptic, elliptic_matrix


@dataclass(frozen=True, eq=False)
class RegOperator:
    """gamma > 0, delta >= 0, and the mean field of one parameter"""

    gamma: float
    delta: float
    mean: ScalarField

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ParameterError(f"regularization requires gamma > 0, got gamma={self.gamma}")
        if not (np.isfinite(self.delta) and self.delta >= 0):
            raise ParameterError(f"regularization requires delta >= 0, got delta={self.delta}")

    def apply_A(self, m: ScalarField) -> ScalarField:
        return apply_elliptic(self.gamma, self.delta, m)

    @cached_property
    def _A_factor(self):
        if self.delta == 0:
            raise ParameterError("inverting A requires delta > 0 (A is singular on constants)")
        return spla.splu(elliptic_matrix(self.mean.grid, self.gamma, self.delta).tocsc())

    def solve_A(self, rhs: ScalarField) -> ScalarField:
        """A^{-1} rhs"""
        check_same_grid(rhs, self.mean)
        return ScalarField(rhs.grid, self._A_factor.solve(rhs.values))

    def apply_inverse_square(self, rhs: ScalarField) -> ScalarField:
        """A^{-2} rhs by two elliptic solves"""
        return self.solve_A(self.solve_A(rhs))


def reg_cost(m: ScalarField, op: RegOperator) -> float:
    """1/2 inner(A(m - mean), A(m - mean))"""
    check_same_grid(m, op.mean)
    Am = op.apply_A(m - op.mean)
    return 0.5 * inner(Am, Am)


def reg_grad(m: ScalarField, op: RegOperator) -> ScalarField:
    """A^2 (m - mean)"""
    check_same_grid(m, op.mean)
    return op.apply_A(op.apply_A(m - op.mean))


def reg_hess_apply(mhat: ScalarField, op: RegOperator) -> ScalarField:
    """A^2 mhat (R is quadratic, so this is exact)"""
    check_same_grid(mhat, op.mean)
    return op.apply_A(op.apply_A(mhat))
