"""
Sparse linear solves shared by the forward, adjoint and incremental problems
"""

import logging
from typing import Optional

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from src.config import Config
from src.errors import LinearSolveError

logger = logging.getLogger(__name__)


class LinearSolver:
    """Solve A x = b for a sparse symmetric A

    CG is used when A is known to be positive definite, a sparse LU
    factorization otherwise (or when ``method="direct"``). The factorization
    is computed once and reused across right-hand sides.
    """

    def __init__(
        self,
        matrix: sps.spmatrix,
        spd: bool,
        method: Optional[str] = None,
        rtol: Optional[float] = None,
    ):
        self.matrix = matrix.tocsr()
        self.spd = spd
        self.method = (method or Config.LINEAR_SOLVER).lower()
        self.rtol = rtol if rtol is not None else Config.LINEAR_RTOL
        self._lu = None

    def _factor(self):
        if self._lu is None:
            try:
                self._lu = spla.splu(self.matrix.tocsc())
            except RuntimeError as e:
                raise LinearSolveError(f"sparse factorization failed: {e}") from e
        return self._lu

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if not np.any(rhs):
            return np.zeros_like(rhs)

        if self.method == "cg" and self.spd:
            n = rhs.size
            x, info = spla.cg(self.matrix, rhs, rtol=self.rtol, atol=0.0, maxiter=10 * n)
            if info == 0 and np.all(np.isfinite(x)):
                return x
            logger.warning("CG did not converge (info=%d), falling back to sparse LU", info)

        x = self._factor().solve(rhs)
        if not np.all(np.isfinite(x)):
            raise LinearSolveError("linear solve produced non-finite values")
        return x
