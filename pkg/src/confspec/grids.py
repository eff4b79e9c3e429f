"""Uniform periodic grids (flat-torus topology) and the field types that
live on them.

All fields store lower-index components as numpy arrays whose trailing axes
are the grid axes.  Symmetric 2-tensors are stored packed (n(n+1)/2
components per node) so that symmetry holds by storage.  Instances are
immutable: arrays are frozen at construction and every operation returns a
new field.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import GridMismatch, SingularMetric

#: relative threshold for the pointwise SPD check at metric construction
SPD_RTOL = 1e-12


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=np.float64)
    if out is a:
        out = out.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Grid:
    """Uniform grid on the torus 픗^n = ∏ [0, L_i) with periodic wrap.

    ``order`` is the finite-difference stencil order (2 or 4) used by every
    derivative taken on fields over this grid.
    """

    shape: tuple[int, ...]
    period: tuple[float, ...]
    order: int = 4

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        object.__setattr__(self, "period", tuple(float(p) for p in self.period))
        if len(self.shape) < 3:
            raise ValueError(f"grid dimension must be >= 3, got {len(self.shape)}")
        if len(self.period) != len(self.shape):
            raise ValueError("period and shape must have the same length")
        if any(n < 4 for n in self.shape):
            raise ValueError(f"all resolutions must be >= 4, got {self.shape}")
        if any(p <= 0 for p in self.period):
            raise ValueError(f"all periods must be positive, got {self.period}")
        if self.order not in (2, 4):
            raise ValueError(f"stencil order must be 2 or 4, got {self.order}")

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(p / n for p, n in zip(self.period, self.shape))

    @property
    def max_spacing(self) -> float:
        return max(self.spacing)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis_coordinates(self, i: int) -> np.ndarray:
        """Node coordinates along axis i, in [0, L_i)."""
        n = self.shape[i]
        return np.arange(n) * (self.period[i] / n)

    def coordinates(self) -> np.ndarray:
        """Coordinate array of shape (dim, *shape)."""
        axes = [self.axis_coordinates(i) for i in range(self.dim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"))

    def with_shape(self, shape: tuple[int, ...]) -> "Grid":
        return Grid(tuple(shape), self.period, self.order)


def _same_grid(*fields) -> Grid:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatch(f"fields live on different grids: {f.grid} vs {grid}")
    return grid


def _check_finite(values: np.ndarray, what: str):
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{what} contains non-finite values")


@dataclass(frozen=True)
class ScalarField:
    """One real value per node; values shaped like the grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            raise ValueError(f"scalar values shape {v.shape} != grid shape {self.grid.shape}")
        _check_finite(v, "scalar field")
        object.__setattr__(self, "values", _freeze(v))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "ScalarField":
        """Sample fn(x) on the grid; fn receives a (dim, *shape) coordinate array."""
        return cls(grid, np.asarray(fn(grid.coordinates()), dtype=np.float64))

    def __add__(self, other):
        if isinstance(other, ScalarField):
            _same_grid(self, other)
            return ScalarField(self.grid, self.values + other.values)
        return ScalarField(self.grid, self.values + float(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other if isinstance(other, ScalarField) else ScalarField(self.grid, self.values - float(other))

    def __rsub__(self, other):
        return ScalarField(self.grid, float(other) - self.values)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            _same_grid(self, other)
            return ScalarField(self.grid, self.values * other.values)
        if isinstance(other, (CovectorField, SymTensorField)):
            return other * self
        return ScalarField(self.grid, self.values * float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True)
class CovectorField:
    """Lower-index 1-form: component axis first, shape (dim, *grid.shape)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.dim,) + self.grid.shape:
            raise ValueError(f"covector values shape {v.shape} != {(self.grid.dim,) + self.grid.shape}")
        _check_finite(v, "covector field")
        object.__setattr__(self, "values", _freeze(v))

    def component(self, i: int) -> np.ndarray:
        return self.values[i]

    def __add__(self, other):
        _same_grid(self, other)
        return CovectorField(self.grid, self.values + other.values)

    def __sub__(self, other):
        _same_grid(self, other)
        return CovectorField(self.grid, self.values - other.values)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            _same_grid(self, other)
            return CovectorField(self.grid, self.values * other.values[None])
        return CovectorField(self.grid, self.values * float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return CovectorField(self.grid, -self.values)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


def _packed_pairs(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i, n)]


@dataclass(frozen=True)
class SymTensorField:
    """Symmetric lower-index 2-tensor, packed as n(n+1)/2 components per node.

    Component order is row-major over the upper triangle:
    (0,0), (0,1), ..., (0,n-1), (1,1), ..., (n-1,n-1).
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        n = self.grid.dim
        npairs = n * (n + 1) // 2
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (npairs,) + self.grid.shape:
            raise ValueError(f"packed tensor shape {v.shape} != {(npairs,) + self.grid.shape}")
        _check_finite(v, "symmetric tensor field")
        object.__setattr__(self, "values", _freeze(v))

    @cached_property
    def _pair_index(self) -> dict[tuple[int, int], int]:
        return {p: k for k, p in enumerate(_packed_pairs(self.grid.dim))}

    def component(self, i: int, j: int) -> np.ndarray:
        if i > j:
            i, j = j, i
        return self.values[self._pair_index[(i, j)]]

    def as_matrix(self) -> np.ndarray:
        """Unpack to shape (n, n, *grid.shape)."""
        n = self.grid.dim
        out = np.empty((n, n) + self.grid.shape)
        for k, (i, j) in enumerate(_packed_pairs(n)):
            out[i, j] = self.values[k]
            out[j, i] = self.values[k]
        return out

    @classmethod
    def from_matrix(cls, grid: Grid, mat: np.ndarray, symmetrize: bool = False) -> "SymTensorField":
        """Pack a full (n, n, *shape) array; off-diagonal pairs must agree
        unless symmetrize is set."""
        n = grid.dim
        if mat.shape != (n, n) + grid.shape:
            raise ValueError(f"matrix shape {mat.shape} != {(n, n) + grid.shape}")
        if symmetrize:
            mat = 0.5 * (mat + np.swapaxes(mat, 0, 1))
        packed = np.empty((n * (n + 1) // 2,) + grid.shape)
        for k, (i, j) in enumerate(_packed_pairs(n)):
            if not symmetrize and i != j and not np.array_equal(mat[i, j], mat[j, i]):
                raise ValueError(f"matrix is not symmetric at component ({i},{j})")
            packed[k] = mat[i, j]
        return cls(grid, packed)

    @classmethod
    def zero(cls, grid: Grid) -> "SymTensorField":
        n = grid.dim
        return cls(grid, np.zeros((n * (n + 1) // 2,) + grid.shape))

    def __add__(self, other):
        _same_grid(self, other)
        return SymTensorField(self.grid, self.values + other.values)

    def __sub__(self, other):
        _same_grid(self, other)
        return SymTensorField(self.grid, self.values - other.values)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            _same_grid(self, other)
            return SymTensorField(self.grid, self.values * other.values[None])
        return SymTensorField(self.grid, self.values * float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return SymTensorField(self.grid, -self.values)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True)
class MetricField:
    """Riemannian metric: a SymTensorField that is pointwise SPD.

    Positive-definiteness is checked at construction: the smallest pointwise
    eigenvalue must exceed SPD_RTOL times the largest one at every node.
    """

    tensor: SymTensorField

    def __post_init__(self):
        mat = self.tensor.as_matrix()  # (n, n, *shape)
        stacked = np.moveaxis(mat, (0, 1), (-2, -1))
        eigs = np.linalg.eigvalsh(stacked)
        smallest, largest = eigs[..., 0], eigs[..., -1]
        bad = smallest <= SPD_RTOL * np.abs(largest)
        if np.any(bad):
            worst = float(np.min(smallest))
            raise SingularMetric(
                f"metric not positive definite at {int(np.count_nonzero(bad))} node(s); "
                f"smallest pointwise eigenvalue {worst:.3e}"
            )

    @property
    def grid(self) -> Grid:
        return self.tensor.grid

    @property
    def dim(self) -> int:
        return self.tensor.grid.dim

    def component(self, i: int, j: int) -> np.ndarray:
        return self.tensor.component(i, j)

    def as_matrix(self) -> np.ndarray:
        return self.tensor.as_matrix()

    @cached_property
    def inverse_matrix(self) -> np.ndarray:
        """g^{ij}, shape (n, n, *grid.shape)."""
        mat = np.moveaxis(self.as_matrix(), (0, 1), (-2, -1))
        inv = np.linalg.inv(mat)
        out = np.moveaxis(inv, (-2, -1), (0, 1))
        out.setflags(write=False)
        return out

    @cached_property
    def determinant(self) -> np.ndarray:
        mat = np.moveaxis(self.as_matrix(), (0, 1), (-2, -1))
        det = np.linalg.det(mat)
        det.setflags(write=False)
        return det

    @classmethod
    def flat(cls, grid: Grid, scale: float = 1.0) -> "MetricField":
        """Constant multiple of the identity metric."""
        n = grid.dim
        packed = np.zeros((n * (n + 1) // 2,) + grid.shape)
        for k, (i, j) in enumerate(_packed_pairs(n)):
            if i == j:
                packed[k] = scale
        return cls(SymTensorField(grid, packed))

    @classmethod
    def from_tensor(cls, tensor: SymTensorField) -> "MetricField":
        return cls(tensor)

    def scaled(self, c: float) -> "MetricField":
        """Homothety g -> c*g."""
        if c <= 0:
            raise ValueError("homothety factor must be positive")
        return MetricField(SymTensorField(self.grid, self.tensor.values * c))


@dataclass(frozen=True)
class ChristoffelField:
    """Connection coefficients Γ^k_{ij}, shape (n, n, n, *grid.shape),
    symmetric in the lower pair (i, j) by construction."""

    grid: Grid
    values: np.ndarray  # index order (k, i, j, *shape)

    def __post_init__(self):
        n = self.grid.dim
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (n, n, n) + self.grid.shape:
            raise ValueError(f"christoffel shape {v.shape} != {(n, n, n) + self.grid.shape}")
        _check_finite(v, "christoffel field")
        object.__setattr__(self, "values", _freeze(v))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))
