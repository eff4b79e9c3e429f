"""Discrete Riemannian tensor calculus on periodic grids.

Conventions:
  * all fields carry lower indices; indices are raised pointwise with the
    inverse metric inside each operation;
  * the Laplacian is the analyst's one (Δ f = g^{ij}(∂_i∂_j f - Γ^k_{ij}∂_k f)),
    so -Δ is nonnegative on the flat torus;
  * δ is the formal adjoint of the covariant derivative:
    (∇α, β) = (α, δβ) in L²(dV_g), which fixes δT = -g^{jk}∇_k T_{j·}.

Derivatives use the grid's stencil (2nd or 4th order central differences);
stencils applied to constant fields return exactly zero.
"""

from __future__ import annotations

import numpy as np

from .errors import GridMismatch, NonPositiveConformalFactor
from .grids import (
    ChristoffelField,
    CovectorField,
    Grid,
    MetricField,
    ScalarField,
    SymTensorField,
    _packed_pairs,
    _same_grid,
)
from .stencils import diff1, diff2


def _d1(grid: Grid, arr: np.ndarray, i: int) -> np.ndarray:
    """First derivative along grid axis i; arr may have leading component axes."""
    axis = arr.ndim - grid.dim + i
    return diff1(arr, axis, grid.spacing[i], grid.order)


def _d2(grid: Grid, arr: np.ndarray, i: int) -> np.ndarray:
    axis = arr.ndim - grid.dim + i
    return diff2(arr, axis, grid.spacing[i], grid.order)


def differential(f: ScalarField) -> CovectorField:
    """df, the exterior derivative of a scalar field."""
    grid = f.grid
    comps = np.stack([_d1(grid, f.values, i) for i in range(grid.dim)])
    return CovectorField(grid, comps)


def christoffel(g: MetricField) -> ChristoffelField:
    """Levi-Civita connection coefficients
    Γ^k_{ij} = ½ g^{kl}(∂_i g_{jl} + ∂_j g_{il} - ∂_l g_{ij})."""
    grid = g.grid
    n = grid.dim
    gmat = g.as_matrix()
    # dg[a, b, c] = ∂_a g_{bc}
    dg = np.stack([_d1(grid, gmat, a) for a in range(n)])
    # term[l, i, j] = ∂_i g_{jl} + ∂_j g_{il} - ∂_l g_{ij}
    term = np.einsum("ijl...->lij...", dg) + np.einsum("jil...->lij...", dg) - dg
    gamma = 0.5 * np.einsum("kl...,lij...->kij...", g.inverse_matrix, term)
    return ChristoffelField(grid, gamma)


def ricci(g: MetricField, gamma: ChristoffelField | None = None) -> SymTensorField:
    """Ricci tensor, assembled from Γ and its grid derivatives."""
    grid = g.grid
    n = grid.dim
    gam = (gamma or christoffel(g)).values
    # contracted symbol c_i = Γ^k_{ki}
    contr = np.einsum("kki...->i...", gam)
    term1 = np.zeros((n, n) + grid.shape)
    for k in range(n):
        term1 += _d1(grid, gam[k], k)
    term2 = np.stack([_d1(grid, contr, j) for j in range(n)])  # [j, i] = ∂_j c_i
    term2 = np.einsum("ji...->ij...", term2)
    term3 = np.einsum("l...,lij...->ij...", contr, gam)
    term4 = np.einsum("kjl...,lki...->ij...", gam, gam)
    ric = term1 - term2 + term3 - term4
    return SymTensorField.from_matrix(grid, ric, symmetrize=True)


def scalar_curvature(g: MetricField, gamma: ChristoffelField | None = None) -> ScalarField:
    """R = g^{ij} Ric_{ij}."""
    ric = ricci(g, gamma)
    return trace(g, ric)


def hessian(g: MetricField, f: ScalarField, gamma: ChristoffelField | None = None) -> SymTensorField:
    """(∇²f)_{ij} = ∂_i∂_j f - Γ^k_{ij} ∂_k f."""
    grid = _same_grid(g.tensor, f)
    n = grid.dim
    gam = (gamma or christoffel(g)).values
    df = np.stack([_d1(grid, f.values, i) for i in range(n)])
    packed = []
    for i, j in _packed_pairs(n):
        d2 = _d2(grid, f.values, i) if i == j else _d1(grid, _d1(grid, f.values, i), j)
        packed.append(d2 - np.einsum("k...,k...->...", gam[:, i, j], df))
    return SymTensorField(grid, np.stack(packed))


def laplace_beltrami(g: MetricField, f: ScalarField, gamma: ChristoffelField | None = None) -> ScalarField:
    """Δ_g f = tr_g ∇²f; reduces to the sum of second derivatives for flat g."""
    return trace(g, hessian(g, f, gamma))


def trace(g: MetricField, h: SymTensorField) -> ScalarField:
    """tr_g h = g^{ij} h_{ij}."""
    grid = _same_grid(g.tensor, h)
    vals = np.einsum("ij...,ij...->...", g.inverse_matrix, h.as_matrix())
    return ScalarField(grid, vals)


def inner(g: MetricField, a: SymTensorField, b: SymTensorField) -> ScalarField:
    """Pointwise ⟨a, b⟩ = a^{ij} b_{ij}, indices raised with g."""
    grid = _same_grid(g.tensor, a, b)
    ginv = g.inverse_matrix
    vals = np.einsum("ik...,jl...,kl...,ij...->...", ginv, ginv, a.as_matrix(), b.as_matrix(), optimize=True)
    return ScalarField(grid, vals)


def inner_covector(g: MetricField, a: CovectorField, b: CovectorField) -> ScalarField:
    """Pointwise ⟨a, b⟩ = g^{ij} a_i b_j."""
    grid = _same_grid(g.tensor, a, b)
    vals = np.einsum("ij...,i...,j...->...", g.inverse_matrix, a.values, b.values)
    return ScalarField(grid, vals)


def traceless(g: MetricField, v: SymTensorField) -> SymTensorField:
    """v - (1/n)(tr_g v) g, the traceless part of v."""
    grid = _same_grid(g.tensor, v)
    tr = trace(g, v)
    vals = v.values - (tr.values[None] / grid.dim) * g.tensor.values
    return SymTensorField(grid, vals)


def sym_outer(a: CovectorField, b: CovectorField) -> SymTensorField:
    """Symmetrized tensor product ½(a⊗b + b⊗a); equals a⊗a when a is b."""
    grid = _same_grid(a, b)
    packed = [
        0.5 * (a.values[i] * b.values[j] + a.values[j] * b.values[i])
        for i, j in _packed_pairs(grid.dim)
    ]
    return SymTensorField(grid, np.stack(packed))


def covariant_derivative_oneform(
    g: MetricField, w: CovectorField, gamma: ChristoffelField | None = None
) -> np.ndarray:
    """∇_k w_j as a full (generally non-symmetric) array of shape (k, j, *grid)."""
    grid = _same_grid(g.tensor, w)
    n = grid.dim
    gam = (gamma or christoffel(g)).values
    dw = np.stack([_d1(grid, w.values, k) for k in range(n)])  # [k, j]
    return dw - np.einsum("mkj...,m...->kj...", gam, w.values)


def divergence(g: MetricField, t: SymTensorField, gamma: ChristoffelField | None = None) -> CovectorField:
    """δt with the adjoint sign convention: (δt)_i = -g^{jk} ∇_k t_{ji}."""
    grid = _same_grid(g.tensor, t)
    n = grid.dim
    gam = (gamma or christoffel(g)).values
    tmat = t.as_matrix()
    dt = np.stack([_d1(grid, tmat, k) for k in range(n)])  # [k, j, i] = ∂_k t_{ji}
    nabla = (
        dt
        - np.einsum("mkj...,mi...->kji...", gam, tmat)
        - np.einsum("mki...,jm...->kji...", gam, tmat)
    )
    vals = -np.einsum("jk...,kji...->i...", g.inverse_matrix, nabla)
    return CovectorField(grid, vals)


def codifferential_oneform(
    g: MetricField, w: CovectorField, gamma: ChristoffelField | None = None
) -> ScalarField:
    """δw = -g^{ij} ∇_i w_j for a 1-form."""
    grid = _same_grid(g.tensor, w)
    nabla = covariant_derivative_oneform(g, w, gamma)
    vals = -np.einsum("ij...,ij...->...", g.inverse_matrix, nabla)
    return ScalarField(grid, vals)


def double_divergence(g: MetricField, h: SymTensorField, gamma: ChristoffelField | None = None) -> ScalarField:
    """δ²h = δ(δh); the formal adjoint of the Hessian, so that
    (∇²f, h) = (f, δ²h) up to discretization error."""
    gam = gamma or christoffel(g)
    return codifferential_oneform(g, divergence(g, h, gam), gam)


def volume_element(g: MetricField) -> ScalarField:
    """√det g per node."""
    return ScalarField(g.grid, np.sqrt(g.determinant))


def quadrature_weights(g: MetricField) -> np.ndarray:
    """Per-node integration weights: uniform cell volume times √det g."""
    return g.grid.cell_volume * np.sqrt(g.determinant)


def integrate(g: MetricField, f: ScalarField) -> float:
    """∫ f dV_g by the periodic trapezoidal rule."""
    _same_grid(g.tensor, f)
    return float(np.sum(f.values * quadrature_weights(g)))


def total_volume(g: MetricField) -> float:
    return float(np.sum(quadrature_weights(g)))


def l2_inner(g: MetricField, f1: ScalarField, f2: ScalarField) -> float:
    """(f1, f2) in L²(M, dV_g)."""
    _same_grid(g.tensor, f1, f2)
    return float(np.sum(f1.values * f2.values * quadrature_weights(g)))


def l2_inner_covector(g: MetricField, a: CovectorField, b: CovectorField) -> float:
    return integrate(g, inner_covector(g, a, b))


def l2_inner_tensor(g: MetricField, a: SymTensorField, b: SymTensorField) -> float:
    return integrate(g, inner(g, a, b))


def l2_norm(g: MetricField, f: ScalarField) -> float:
    return float(np.sqrt(max(l2_inner(g, f, f), 0.0)))


def l2_norm_tensor(g: MetricField, a: SymTensorField) -> float:
    return float(np.sqrt(max(l2_inner_tensor(g, a, a), 0.0)))


def conformal_rescale(g: MetricField, u: ScalarField) -> MetricField:
    """ĝ = u^{4/(n-2)} g for a positive conformal factor u."""
    grid = _same_grid(g.tensor, u)
    if np.min(u.values) <= 0.0:
        raise NonPositiveConformalFactor(
            f"conformal factor must be positive everywhere; min = {np.min(u.values):.3e}"
        )
    power = 4.0 / (grid.dim - 2)
    factor = u.values**power
    return MetricField(SymTensorField(grid, g.tensor.values * factor[None]))
