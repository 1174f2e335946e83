"""
Scalar fields on masked grids, the L2 inner product, and parameter pairs
"""

from dataclasses import dataclass
from typing import Callable, Tuple, Union

import numpy as np

from src.errors import GridMismatchError, ParameterError
from src.grid.grid import Grid2D

Number = Union[int, float]


def check_same_grid(*fields: "ScalarField") -> Grid2D:
    """Return the common grid of fields or raise GridMismatchError"""
    grid = fields[0].grid
    for f in fields[1:]:
        if not grid.matches(f.grid):
            raise GridMismatchError("fields live on different grids")
    return grid


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One real value per active cell; immutable"""

    grid: Grid2D
    values: np.ndarray

    # numpy scalars defer to the reflected operators below
    __array_ufunc__ = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n_active,):
            raise GridMismatchError(
                f"field has {values.size} values, grid has {self.grid.n_active} active cells"
            )
        if not np.all(np.isfinite(values)):
            raise ParameterError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: Grid2D) -> "ScalarField":
        return cls(grid, np.zeros(grid.n_active))

    @classmethod
    def constant(cls, grid: Grid2D, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.n_active, float(value)))

    @classmethod
    def from_function(
        cls, grid: Grid2D, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    ) -> "ScalarField":
        """Sample fn(x, y) at active cell centers"""
        x, y = grid.centers
        return cls(grid, np.broadcast_to(fn(x, y), x.shape))

    @classmethod
    def from_array(cls, grid: Grid2D, array: np.ndarray) -> "ScalarField":
        """Take active-cell entries of an (nx, ny) array"""
        array = np.asarray(array, dtype=float)
        if array.shape != grid.shape:
            raise GridMismatchError(f"array shape {array.shape} != grid shape {grid.shape}")
        return cls(grid, array[grid.mask])

    def to_array(self) -> np.ndarray:
        """(nx, ny) array with NaN at inactive cells"""
        out = np.full(self.grid.shape, np.nan)
        out[self.grid.mask] = self.values
        return out

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, ScalarField):
            check_same_grid(self, other)
            return other.values
        return np.asarray(other, dtype=float)

    def __add__(self, other) -> "ScalarField":
        return ScalarField(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other) -> "ScalarField":
        return ScalarField(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other) -> "ScalarField":
        return ScalarField(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other) -> "ScalarField":
        return ScalarField(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "ScalarField":
        return ScalarField(self.grid, self.values / self._coerce(other))

    def __neg__(self) -> "ScalarField":
        return ScalarField(self.grid, -self.values)

    def norm(self) -> float:
        """L2 norm induced by inner"""
        return float(np.sqrt(inner(self, self)))

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())

    def total(self) -> float:
        """Area-weighted sum (integral over the domain)"""
        return float(self.values.sum() * self.grid.cell_area)


def inner(f: ScalarField, g: ScalarField) -> float:
    """L2 inner product by midpoint quadrature: sum f*g*hx*hy"""
    grid = check_same_grid(f, g)
    return float(np.dot(f.values, g.values) * grid.cell_area)


class FieldPair:
    """Vector-space operations for a pair of fields on one grid

    Subclasses name their two components through ``_names``. Arithmetic
    returns ``_vector_type()``: the left operand's type, unless that type
    carries constraints a difference or negation need not satisfy.
    """

    _names: Tuple[str, str] = ("first", "second")
    __array_ufunc__ = None

    @property
    def parts(self) -> Tuple[ScalarField, ScalarField]:
        return getattr(self, self._names[0]), getattr(self, self._names[1])

    @classmethod
    def from_parts(cls, first: ScalarField, second: ScalarField):
        return cls(**{cls._names[0]: first, cls._names[1]: second})

    @classmethod
    def _vector_type(cls) -> type:
        return cls

    @property
    def grid(self) -> Grid2D:
        return self.parts[0].grid

    def __add__(self, other: "FieldPair"):
        a, b = self.parts
        c, d = other.parts
        return self._vector_type().from_parts(a + c, b + d)

    def __sub__(self, other: "FieldPair"):
        a, b = self.parts
        c, d = other.parts
        return self._vector_type().from_parts(a - c, b - d)

    def __mul__(self, scalar: Number):
        a, b = self.parts
        return self._vector_type().from_parts(a * scalar, b * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        a, b = self.parts
        return self._vector_type().from_parts(-a, -b)

    def dot(self, other: "FieldPair") -> float:
        """Joint inner product over both components"""
        a, b = self.parts
        c, d = other.parts
        return inner(a, c) + inner(b, d)

    def norm(self) -> float:
        return float(np.sqrt(self.dot(self)))


@dataclass(frozen=True, eq=False)
class GradientPair(FieldPair):
    """Gradient (or Hessian action, or search direction) components for D and G"""

    gD: ScalarField
    gG: ScalarField

    _names = ("gD", "gG")

    @classmethod
    def zeros_like(cls, params: FieldPair) -> "GradientPair":
        grid = params.grid
        return cls(ScalarField.zeros(grid), ScalarField.zeros(grid))


@dataclass(frozen=True, eq=False)
class ParamPair(FieldPair):
    """Diffusivity D (mm^2/day) and proliferation rate G (1/day)

    Sums, differences and multiples of parameter pairs are unconstrained
    GradientPairs; use ``shifted`` to step to a new parameter point.
    """

    D: ScalarField
    G: ScalarField

    _names = ("D", "G")

    def __post_init__(self):
        check_same_grid(self.D, self.G)
        if self.D.min() < 0:
            raise ParameterError(f"diffusivity must be nonnegative, min D = {self.D.min():g}")

    @classmethod
    def _vector_type(cls) -> type:
        return GradientPair

    def shifted(self, direction: FieldPair, alpha: float) -> "ParamPair":
        """theta + alpha * direction"""
        dD, dG = direction.parts
        return ParamPair(D=self.D + alpha * dD, G=self.G + alpha * dG)


def smooth_field(
    grid: Grid2D, base: float, amplitude: float, seed: int, modes: int = 3
) -> ScalarField:
    """base plus a random low-frequency cosine perturbation with max |perturbation| = amplitude"""
    if amplitude < 0:
        raise ParameterError(f"perturbation amplitude must be nonnegative, got {amplitude}")
    rng = np.random.default_rng(seed)
    x, y = grid.centers
    Lx, Ly = grid.nx * grid.hx, grid.ny * grid.hy
    pert = np.zeros(grid.n_active)
    for kx in range(modes + 1):
        for ky in range(modes + 1):
            if kx == 0 and ky == 0:
                continue
            coeff = rng.standard_normal() / (1.0 + kx**2 + ky**2)
            pert += coeff * np.cos(np.pi * kx * x / Lx) * np.cos(np.pi * ky * y / Ly)
    peak = np.abs(pert).max()
    if peak > 0:
        pert *= amplitude / peak
    return ScalarField(grid, base + pert)
