"""
Discrete differential operators on masked grids

Conservative cell-centered finite volumes: the flux through an interior face
is D_face * (u_hi - u_lo) / h^2 with D_face the arithmetic mean of the two
adjacent cells. Boundary faces carry zero flux (homogeneous Neumann).
"""

import numpy as np
import scipy.sparse as sps

from src.errors import ParameterError
from src.grid.field import ScalarField, check_same_grid
from src.grid.grid import Grid2D


def _face_coefficients(D: ScalarField) -> np.ndarray:
    grid = D.grid
    return grid.faces.weight * (grid.averaging_matrix @ D.values)


def diffusion_matrix(D: ScalarField) -> sps.csr_matrix:
    """Sparse matrix L_D with L_D u = div(D grad u) on active cells"""
    grid = D.grid
    E = grid.difference_matrix
    return (-(E.T @ sps.diags(_face_coefficients(D)) @ E)).tocsr()


def apply_diffusion(D: ScalarField, u: ScalarField) -> ScalarField:
    """div(D grad u) with zero flux across the boundary"""
    grid = check_same_grid(D, u)
    E = grid.difference_matrix
    flux = _face_coefficients(D) * (E @ u.values)
    return ScalarField(grid, -(E.T @ flux))


def flux_pairing(u: ScalarField, p: ScalarField) -> ScalarField:
    """Discrete grad(u) . grad(p) as the D-derivative of the diffusion stencil

    Satisfies inner(flux_pairing(u, p), Dt) == -inner(p, apply_diffusion(Dt, u))
    for every field Dt: each face product is split evenly between its cells.
    """
    grid = check_same_grid(u, p)
    E = grid.difference_matrix
    face = grid.faces.weight * (E @ u.values) * (E @ p.values)
    return ScalarField(grid, grid.averaging_matrix.T @ face)


def _check_elliptic(gamma: float, delta: float):
    if not gamma > 0 or not delta >= 0:
        raise ParameterError(
            f"elliptic operator requires gamma > 0 and delta >= 0, got gamma={gamma}, delta={delta}"
        )


def elliptic_matrix(grid: Grid2D, gamma: float, delta: float) -> sps.csr_matrix:
    """Sparse matrix of A m = -div(gamma grad m) + delta m (Neumann)"""
    _check_elliptic(gamma, delta)
    L = diffusion_matrix(ScalarField.constant(grid, gamma))
    return (-L + delta * sps.identity(grid.n_active, format="csr")).tocsr()


def apply_elliptic(gamma: float, delta: float, m: ScalarField) -> ScalarField:
    """A m = -div(gamma grad m) + delta m; symmetric under inner"""
    _check_elliptic(gamma, delta)
    gamma_field = ScalarField.constant(m.grid, gamma)
    return -apply_diffusion(gamma_field, m) + delta * m
