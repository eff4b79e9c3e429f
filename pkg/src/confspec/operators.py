"""Discrete conformal Laplacian: assembly and eigensolvers.

The operator -Δ_g + c R_g is discretized on node vectors and made exactly
symmetric in the mass-weighted frame: with W = diag(cell volume · √det g),
the raw operator L is conjugated to W^{1/2} L W^{-1/2}, symmetrized by
averaging with its transpose (the discarded antisymmetric part is pure
discretization error and is recorded), and the potential c·R is added as an
exact diagonal.  Eigenpairs of the symmetric core are mapped back to
W-orthonormal node vectors, so the pair (A, W) solves A x = λ W x.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import geometry as geo
from .errors import (
    ConvergenceFailure,
    DimensionTooSmall,
    ExcludedCouplingWarning,
    TruncationWarning,
)
from .grids import ChristoffelField, Grid, MetricField, ScalarField
from .stencils import stencil_coefficients

#: below this node count the dense eigensolver is used by default
DENSE_AUTO_LIMIT = 1500
#: hard ceiling for the dense fallback when the iterative solver fails
DENSE_FALLBACK_LIMIT = 4096

EXCLUDED_COUPLINGS = (0.0, 0.5)


def coupling_constant(n: int) -> float:
    """The conformal coupling (n-2)/(4(n-1)) in dimension n >= 3."""
    if n < 3:
        raise DimensionTooSmall(f"coupling constant needs n >= 3, got {n}")
    return (n - 2) / (4.0 * (n - 1))


def _shift_matrix(n: int, offset: int) -> sp.csr_matrix:
    idx = np.arange(n)
    return sp.csr_matrix((np.ones(n), (idx, (idx + offset) % n)), shape=(n, n))


@lru_cache(maxsize=64)
def _axis_operator(grid: Grid, axis: int, kind: str) -> sp.csr_matrix:
    """Sparse derivative along one grid axis, acting on C-order node vectors."""
    coeffs = stencil_coefficients(kind, grid.order, grid.spacing[axis])
    n = grid.shape[axis]
    m = sp.csr_matrix((n, n))
    for off, c in coeffs.items():
        m = m + c * _shift_matrix(n, off)
    full = None
    for a, na in enumerate(grid.shape):
        blk = m if a == axis else sp.identity(na, format="csr")
        full = blk if full is None else sp.kron(full, blk, format="csr")
    return full.tocsr()


def first_derivative_matrix(grid: Grid, axis: int) -> sp.csr_matrix:
    return _axis_operator(grid, axis, "first")


def second_derivative_matrix(grid: Grid, axis: int) -> sp.csr_matrix:
    return _axis_operator(grid, axis, "second")


@dataclass(frozen=True)
class OperatorPair:
    """Discrete self-adjoint realization of -Δ_g + c R_g in L²(dV_g).

    ``core`` is the exactly symmetric matrix in the W^{1/2}-conjugated frame;
    ``w`` the positive diagonal mass.  The weighted stiffness A = W^{1/2}
    core W^{1/2} together with W defines the generalized problem
    A x = λ W x whose eigenvectors are W-orthonormal.
    """

    grid: Grid
    core: sp.csr_matrix
    w: np.ndarray
    c: float
    n: int
    asymmetry: float
    potential_min: float
    potential_max: float

    @property
    def num_nodes(self) -> int:
        return int(self.w.size)

    @property
    def excluded_coupling(self) -> bool:
        return any(self.c == v for v in EXCLUDED_COUPLINGS)

    @property
    def stiffness(self) -> sp.csr_matrix:
        """A = W^{1/2} core W^{1/2}, symmetrized exactly."""
        s = np.sqrt(self.w)
        m = sp.diags(s) @ self.core @ sp.diags(s)
        return ((m + m.T) * 0.5).tocsr()

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Node values of (-Δ_g + cR_g) x."""
        s = np.sqrt(self.w)
        return (self.core @ (s * x)) / s


def assemble(g: MetricField, c: float, gamma: ChristoffelField | None = None) -> OperatorPair:
    """Assemble -Δ_g + c R_g as an OperatorPair.

    Any finite c is accepted; c = coupling_constant(n) gives the conformal
    Laplacian.  c in {0, 1/2} triggers a warning because the kernel-breaking
    machinery excludes those values.
    """
    if not np.isfinite(c):
        raise ValueError("coupling constant must be finite")
    if any(c == v for v in EXCLUDED_COUPLINGS):
        warnings.warn(
            f"coupling c = {c} is excluded by the kernel-perturbation theory (c != 0, c != 1/2)",
            ExcludedCouplingWarning,
            stacklevel=2,
        )
    grid = g.grid
    n = grid.dim
    gam = gamma or geo.christoffel(g)
    ginv = g.inverse_matrix
    r = geo.scalar_curvature(g, gam)

    # -Δ_g = -Σ g^{ij} ∂_i∂_j + Σ β^k ∂_k,  β^k = g^{ij} Γ^k_{ij}
    beta = np.einsum("ij...,kij...->k...", ginv, gam.values)
    lap = None

    def acc(mat):
        nonlocal lap
        lap = mat if lap is None else lap + mat

    for i in range(n):
        acc(sp.diags(-ginv[i, i].ravel()) @ second_derivative_matrix(grid, i))
        for j in range(i + 1, n):
            mixed = first_derivative_matrix(grid, i) @ first_derivative_matrix(grid, j)
            acc(sp.diags(-2.0 * ginv[i, j].ravel()) @ mixed)
        acc(sp.diags(beta[i].ravel()) @ first_derivative_matrix(grid, i))

    w = geo.quadrature_weights(g).ravel()
    s = np.sqrt(w)
    conj = sp.diags(s) @ lap @ sp.diags(1.0 / s)
    anti = conj - conj.T
    denom = spla.norm(conj)
    asymmetry = float(spla.norm(anti) / denom) if denom > 0 else 0.0
    core = (conj + conj.T) * 0.5
    potential = c * r.values.ravel()
    core = (core + sp.diags(potential)).tocsr()
    return OperatorPair(
        grid=grid,
        core=core,
        w=w,
        c=float(c),
        n=n,
        asymmetry=asymmetry,
        potential_min=float(potential.min()),
        potential_max=float(potential.max()),
    )


def default_kernel_tolerance(grid: Grid, scale: float, kappa: float = 1.0) -> float:
    """τ = max(1e-8, κ · h^p · scale): a discrete zero is only resolvable to
    discretization accuracy."""
    return max(1e-8, kappa * grid.max_spacing**grid.order * abs(scale))


@dataclass(frozen=True)
class SpectralDecomposition:
    """Sorted eigenpairs of an OperatorPair.

    ``vectors`` holds W-orthonormal node vectors as columns; ``residuals``
    are 2-norms of the symmetric-frame residual core y - λ y per pair.
    """

    grid: Grid
    eigenvalues: np.ndarray
    vectors: np.ndarray
    w: np.ndarray
    residuals: np.ndarray
    kernel_tol: float
    method: str

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        if lam.size > 1 and np.any(np.diff(lam) < 0):
            raise ValueError("eigenvalues must be ascending")

    @property
    def k(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def counts(self) -> tuple[int, int, int]:
        """(negative, zero-within-tolerance, positive) over the window."""
        lam, tau = self.eigenvalues, self.kernel_tol
        neg = int(np.sum(lam < -tau))
        zero = int(np.sum(np.abs(lam) <= tau))
        return neg, zero, int(lam.size - neg - zero)

    @property
    def multiplicity(self) -> int:
        return self.counts[1]

    def orthonormality_residual(self) -> float:
        gram = self.vectors.T @ (self.w[:, None] * self.vectors)
        return float(np.max(np.abs(gram - np.eye(self.k)))) if self.k else 0.0

    def eigenfunction(self, i: int) -> ScalarField:
        return ScalarField(self.grid, self.vectors[:, i].reshape(self.grid.shape))

    def restrict(self, mask: np.ndarray) -> "SpectralDecomposition":
        idx = np.flatnonzero(mask)
        return SpectralDecomposition(
            grid=self.grid,
            eigenvalues=self.eigenvalues[idx],
            vectors=self.vectors[:, idx],
            w=self.w,
            residuals=self.residuals[idx],
            kernel_tol=self.kernel_tol,
            method=self.method,
        )

    def clusters(self, gap: float | None = None) -> list[list[int]]:
        """Indices grouped into numerically degenerate clusters (gap < τ)."""
        tol = self.kernel_tol if gap is None else gap
        groups: list[list[int]] = []
        for i, lam in enumerate(self.eigenvalues):
            if groups and lam - self.eigenvalues[groups[-1][-1]] < tol:
                groups[-1].append(i)
            else:
                groups.append([i])
        return groups


def _postprocess(pair, lam, yvecs, method, kernel_tol, kappa):
    order = np.argsort(lam, kind="stable")
    lam = lam[order]
    y = yvecs[:, order]
    # tighten orthonormality, then restate eigenvalues as Rayleigh quotients
    gram = y.T @ y
    evals, evecs = np.linalg.eigh(gram)
    y = y @ (evecs @ np.diag(1.0 / np.sqrt(np.maximum(evals, 1e-300))) @ evecs.T)
    core_y = pair.core @ y
    lam = np.einsum("ik,ik->k", y, core_y)
    order = np.argsort(lam, kind="stable")
    lam, y = lam[order], y[:, order]
    core_y = core_y[:, order]
    residuals = np.linalg.norm(core_y - y * lam[None, :], axis=0)
    x = y / np.sqrt(pair.w)[:, None]
    tau = kernel_tol if kernel_tol is not None else default_kernel_tolerance(
        pair.grid, np.max(np.abs(lam)) if lam.size else 1.0, kappa
    )
    return SpectralDecomposition(
        grid=pair.grid,
        eigenvalues=lam,
        vectors=x,
        w=pair.w,
        residuals=residuals,
        kernel_tol=float(tau),
        method=method,
    )


def _dense_eig(pair, k):
    dense = pair.core.toarray()
    lam, vecs = scipy.linalg.eigh(dense)
    return lam[:k], vecs[:, :k]


def _shift_invert_eig(pair, k, seed, tol):
    n = pair.num_nodes
    spread = max(pair.potential_max - pair.potential_min, 1.0)
    sigma = min(0.0, pair.potential_min) - 0.05 * spread - 0.5
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n)
    last_err = None
    for attempt in range(3):
        try:
            lam, vecs = spla.eigsh(
                pair.core.tocsc(), k=k, sigma=sigma, which="LM", v0=v0, tol=tol
            )
            return lam, vecs
        except spla.ArpackNoConvergence as err:
            raise ConvergenceFailure(
                f"ARPACK did not converge ({len(err.eigenvalues)}/{k} pairs)",
                residual=None,
                iterations=getattr(err, "iterations", None),
            ) from err
        except RuntimeError as err:  # singular shift; nudge and retry
            last_err = err
            sigma -= 0.37 * spread + 1.0
    raise ConvergenceFailure(f"shift-invert factorization failed: {last_err}")


def eig_lowest(
    pair: OperatorPair,
    k: int,
    method: str = "auto",
    seed: int = 0,
    tol: float = 0.0,
    kernel_tol: float | None = None,
    kappa: float = 1.0,
) -> SpectralDecomposition:
    """The k algebraically smallest eigenpairs of A x = λ W x.

    method: "auto" | "dense" | "shift-invert".  Auto uses the dense path for
    small problems (or when k is close to the node count) and deterministic
    shift-invert Lanczos otherwise, falling back to dense on failure for node
    counts up to DENSE_FALLBACK_LIMIT.
    """
    n = pair.num_nodes
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= {n}, got {k}")
    chosen = method
    if method == "auto":
        chosen = "dense" if (n <= DENSE_AUTO_LIMIT or k >= n - 1 or k > n // 3) else "shift-invert"
    if chosen == "dense":
        lam, vecs = _dense_eig(pair, k)
    elif chosen == "shift-invert":
        if k >= n - 1:
            raise ValueError("shift-invert needs k < node count - 1; use dense")
        try:
            lam, vecs = _shift_invert_eig(pair, k, seed, tol)
        except ConvergenceFailure:
            if method == "auto" and n <= DENSE_FALLBACK_LIMIT:
                chosen = "dense"
                lam, vecs = _dense_eig(pair, k)
            else:
                raise
    else:
        raise ValueError(f"unknown method {method!r}")
    return _postprocess(pair, lam, vecs, chosen, kernel_tol, kappa)


def _window(pair, threshold, k0, seed, kernel_tol, kappa, max_window=None):
    """Grow the eigenvalue window until it brackets the threshold."""
    n = pair.num_nodes
    cap = n if max_window is None else min(max_window, n)
    k = min(max(k0, 1), cap)
    while True:
        dec = eig_lowest(pair, k, seed=seed, kernel_tol=kernel_tol, kappa=kappa)
        if dec.eigenvalues.size and dec.eigenvalues[-1] > threshold:
            return dec, True
        if k >= cap:
            return dec, False
        k = min(2 * k, cap)


def kernel(
    g: MetricField,
    c: float,
    tau: float | None = None,
    k0: int = 8,
    seed: int = 0,
    pair: OperatorPair | None = None,
    kappa: float = 1.0,
) -> SpectralDecomposition:
    """Eigenpairs with |λ| < τ; an empty result means the metric carries no
    numerical kernel at this tolerance."""
    pair = pair or assemble(g, c)
    # bracket with a provisional threshold, then restrict with the final τ
    dec, bracketed = _window(pair, tau if tau is not None else 0.0, k0, seed, tau, kappa)
    eff_tau = dec.kernel_tol
    if bracketed and dec.eigenvalues[-1] <= eff_tau:
        dec, bracketed = _window(pair, eff_tau, dec.k, seed, tau, kappa)
        eff_tau = dec.kernel_tol
    if not bracketed and dec.k < pair.num_nodes:
        warnings.warn("window capped before bracketing the kernel tolerance", TruncationWarning)
    return dec.restrict(np.abs(dec.eigenvalues) < eff_tau)


def count_below(
    g: MetricField,
    c: float,
    s: float,
    k0: int = 8,
    seed: int = 0,
    pair: OperatorPair | None = None,
    max_window: int | None = None,
) -> int:
    """Number of eigenvalues of -Δ_g + cR_g below s (use c=0 for -Δ, or
    s=0 for the negative count of the conformal Laplacian)."""
    if not np.isfinite(s):
        raise ValueError("threshold must be finite")
    pair = pair or assemble(g, c)
    dec, bracketed = _window(pair, s, k0, seed, None, 1.0, max_window)
    if not bracketed and dec.k < pair.num_nodes:
        warnings.warn(
            f"spectral window (k={dec.k}) did not bracket s={s}; count is a lower bound",
            TruncationWarning,
        )
    return int(np.sum(dec.eigenvalues < s))


@dataclass(frozen=True)
class ConformalCovarianceReport:
    """Sign-count comparison between Y_g and Y_ĝ for ĝ = u^{4/(n-2)} g."""

    counts_before: tuple[int, int, int]
    counts_after: tuple[int, int, int]
    eigenvalues_before: np.ndarray
    eigenvalues_after: np.ndarray
    kernel_residuals: tuple[float, ...]
    tau_before: float
    tau_after: float

    @property
    def counts_agree(self) -> bool:
        return self.counts_before == self.counts_after


def conformal_covariance_check(
    g: MetricField, u: ScalarField, k: int = 8, seed: int = 0, kappa: float = 1.0
) -> ConformalCovarianceReport:
    """Spectra of the conformal Laplacian before and after rescaling by u.

    Reports sign-count agreement and, for every near-zero eigenfunction φ of
    Y_g, the relative L²(dV_ĝ) residual of Y_ĝ applied to u^{-1} φ; the
    transformation law sends kernel to kernel.
    """
    n = g.dim
    c = coupling_constant(n)
    ghat = geo.conformal_rescale(g, u)
    pair_g = assemble(g, c)
    pair_h = assemble(ghat, c)
    dec_g = eig_lowest(pair_g, k, seed=seed, kappa=kappa)
    dec_h = eig_lowest(pair_h, k, seed=seed, kappa=kappa)
    uflat = u.values.ravel()
    residuals = []
    for i in np.flatnonzero(np.abs(dec_g.eigenvalues) <= dec_g.kernel_tol):
        v = dec_g.vectors[:, i] / uflat
        yv = pair_h.apply(v)
        num = np.sqrt(np.sum(yv * yv * pair_h.w))
        den = np.sqrt(np.sum(v * v * pair_h.w))
        residuals.append(float(num / den))
    return ConformalCovarianceReport(
        counts_before=dec_g.counts,
        counts_after=dec_h.counts,
        eigenvalues_before=dec_g.eigenvalues,
        eigenvalues_after=dec_h.eigenvalues,
        kernel_residuals=tuple(residuals),
        tau_before=dec_g.kernel_tol,
        tau_after=dec_h.kernel_tol,
    )
