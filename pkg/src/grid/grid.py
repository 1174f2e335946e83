"""
Masked uniform 2D grid with active-cell indexing

The discrete domain is the set of masked (active) cells of an nx-by-ny array of
rectangular cells. The boundary is implicit: every face between an active cell
and an inactive or out-of-bounds neighbour is a zero-flux face.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import List, NamedTuple, Tuple

import numpy as np
import scipy.sparse as sps

from src.errors import DomainError

# (di, dj) offsets of the four faces of a cell, in a fixed order
FACE_DIRECTIONS: Tuple[Tuple[int, int], ...] = ((-1, 0), (1, 0), (0, -1), (0, 1))


class FaceSet(NamedTuple):
    """Interior faces as (lo, hi) active-index pairs and 1/h^2 weights"""

    lo: np.ndarray
    hi: np.ndarray
    weight: np.ndarray


@dataclass(frozen=True, eq=False)
class Grid2D:
    """Masked uniform grid; mask[i, j] is cell i along x, j along y"""

    nx: int
    ny: int
    hx: float
    hy: float
    mask: np.ndarray
    active_index: np.ndarray  # -1 for inactive cells

    @property
    def n_active(self) -> int:
        return int(self.mask.sum())

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.nx, self.ny)

    @cached_property
    def cells(self) -> np.ndarray:
        """(i, j) coordinates of active cells, ordered by active index"""
        return np.argwhere(self.mask)

    @cached_property
    def centers(self) -> Tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinates (x, y) of active cells"""
        cells = self.cells
        return (cells[:, 0] + 0.5) * self.hx, (cells[:, 1] + 0.5) * self.hy

    @cached_property
    def faces(self) -> FaceSet:
        """All interior faces (both cells active)"""
        lo_parts, hi_parts, w_parts = [], [], []
        for axis, h in ((0, self.hx), (1, self.hy)):
            if axis == 0:
                a, b = self.active_index[:-1, :], self.active_index[1:, :]
            else:
                a, b = self.active_index[:, :-1], self.active_index[:, 1:]
            both = (a >= 0) & (b >= 0)
            lo_parts.append(a[both])
            hi_parts.append(b[both])
            w_parts.append(np.full(int(both.sum()), 1.0 / h**2))
        return FaceSet(
            lo=np.concatenate(lo_parts).astype(np.int64),
            hi=np.concatenate(hi_parts).astype(np.int64),
            weight=np.concatenate(w_parts),
        )

    @cached_property
    def difference_matrix(self) -> sps.csr_matrix:
        """E with (E u)_f = u_hi - u_lo for every interior face f"""
        f = self.faces
        n_faces = f.lo.size
        rows = np.concatenate([np.arange(n_faces), np.arange(n_faces)])
        cols = np.concatenate([f.lo, f.hi])
        data = np.concatenate([-np.ones(n_faces), np.ones(n_faces)])
        return sps.csr_matrix((data, (rows, cols)), shape=(n_faces, self.n_active))

    @cached_property
    def averaging_matrix(self) -> sps.csr_matrix:
        """M with (M D)_f = (D_lo + D_hi) / 2"""
        return abs(self.difference_matrix) * 0.5

    def is_boundary_face(self, i: int, j: int, di: int, dj: int) -> bool:
        """True when the face of active cell (i, j) towards (di, dj) lies on the boundary"""
        if not self.mask[i, j]:
            raise DomainError(f"cell ({i}, {j}) is not active")
        ni, nj = i + di, j + dj
        if not (0 <= ni < self.nx and 0 <= nj < self.ny):
            return True
        return not bool(self.mask[ni, nj])

    def boundary_faces(self) -> List[Tuple[int, int, int]]:
        """(active index, di, dj) for every boundary face"""
        result = []
        for k, (i, j) in enumerate(self.cells):
            for di, dj in FACE_DIRECTIONS:
                if self.is_boundary_face(int(i), int(j), di, dj):
                    result.append((k, di, dj))
        return result

    def matches(self, other: "Grid2D") -> bool:
        """Same geometry (identity or equal shape, spacing and mask)"""
        if self is other:
            return True
        return (
            self.shape == other.shape
            and self.hx == other.hx
            and self.hy == other.hy
            and bool(np.array_equal(self.mask, other.mask))
        )


def build_grid(mask_bitmap, hx: float, hy: float) -> Grid2D:
    """Build a Grid2D from a 2D boolean mask and cell spacings"""
    mask = np.asarray(mask_bitmap)
    if mask.ndim != 2 or mask.shape[0] < 1 or mask.shape[1] < 1:
        raise DomainError(f"mask must be a non-empty 2D array, got shape {mask.shape}")
    mask = mask.astype(bool)
    if not (np.isfinite(hx) and np.isfinite(hy)) or hx <= 0 or hy <= 0:
        raise DomainError(f"cell spacing must be positive, got hx={hx}, hy={hy}")
    if not mask.any():
        raise DomainError("empty domain")

    active_index = np.full(mask.shape, -1, dtype=np.int64)
    active_index[mask] = np.arange(int(mask.sum()))

    mask.setflags(write=False)
    active_index.setflags(write=False)
    nx, ny = mask.shape
    return Grid2D(
        nx=int(nx),
        ny=int(ny),
        hx=float(hx),
        hy=float(hy),
        mask=mask,
        active_index=active_index,
    )


def square_mask(nx: int, ny: int) -> np.ndarray:
    """Full rectangular mask"""
    return np.ones((nx, ny), dtype=bool)


def disk_mask(n: int, radius: float) -> np.ndarray:
    """n-by-n mask of cells whose center lies within radius (in cells) of the grid center"""
    centers = np.arange(n) + 0.5 - n / 2.0
    x, y = np.meshgrid(centers, centers, indexing="ij")
    return x**2 + y**2 <= radius**2
