"""First-order eigenvalue perturbation along curves of metrics.

Implements the variation formulas for scalar curvature and Laplacian under
g(t) = g₀ + t h, the compression of the operator derivative onto a numerical
kernel, the explicit traceless tensor that moves a zero eigenvalue at first
order, eigenvalue branch tracking with eigenvector-overlap matching, the
bisection search for kernel-bearing metrics, and the iterative procedure
that empties a kernel by repeated first-order pushes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import geometry as geo
from . import operators as ops
from .errors import (
    BranchAmbiguity,
    ConstantField,
    ConvergenceFailure,
    DisallowedCoupling,
    EmptyKernel,
    FirstOrderDegenerate,
    LineSearchFailure,
    NoSignChange,
    NotTraceless,
    SingularMetric,
    SPDViolation,
)
from .grids import MetricField, ScalarField, SymTensorField, _same_grid


@dataclass(frozen=True)
class MetricCurve:
    """Curve of metrics through ``base`` with velocity ``direction``.

    The default evaluator is linear, g(t) = g₀ + t h; a custom evaluator may
    realize any analytic curve with the same first-order data.
    """

    base: MetricField
    direction: SymTensorField
    evaluator: Callable[[float], MetricField] | None = None

    def __post_init__(self):
        _same_grid(self.base.tensor, self.direction)

    def metric_at(self, t: float) -> MetricField:
        if self.evaluator is not None:
            return self.evaluator(float(t))
        if t == 0.0:
            return self.base
        return MetricField(
            SymTensorField(self.base.grid, self.base.tensor.values + t * self.direction.values)
        )

    def spd_bound(self) -> float:
        """Largest |t| with g₀ + t h certified pointwise positive definite
        (from the pointwise spectrum of h relative to g₀)."""
        g0 = np.moveaxis(self.base.as_matrix(), (0, 1), (-2, -1))
        h = np.moveaxis(self.direction.as_matrix(), (0, 1), (-2, -1))
        evals, evecs = np.linalg.eigh(g0)
        isqrt = evecs @ (evecs / np.sqrt(evals)[..., None, :]).swapaxes(-2, -1)
        rel = np.linalg.eigvalsh(isqrt @ h @ isqrt)
        top = float(np.max(np.abs(rel)))
        return np.inf if top == 0.0 else 1.0 / top


def dot_scalar_curvature(g: MetricField, h: SymTensorField, gamma=None) -> ScalarField:
    """d/dt R_{g+th}|₀ = -⟨h, Ric⟩ + δ²h - Δ tr h."""
    _same_grid(g.tensor, h)
    gam = gamma or geo.christoffel(g)
    ric = geo.ricci(g, gam)
    first = geo.inner(g, h, ric)
    second = geo.double_divergence(g, h, gam)
    third = geo.laplace_beltrami(g, geo.trace(g, h), gam)
    return ScalarField(g.grid, -first.values + second.values - third.values)


def dot_laplacian(g: MetricField, h: SymTensorField, f: ScalarField, gamma=None) -> ScalarField:
    """d/dt Δ_{g+th} f|₀ = -⟨h, ∇²f⟩ + ⟨δh + ½ d tr h, df⟩."""
    _same_grid(g.tensor, h, f)
    gam = gamma or geo.christoffel(g)
    hess = geo.hessian(g, f, gam)
    first = geo.inner(g, h, hess)
    dtr = geo.differential(geo.trace(g, h))
    cov = geo.divergence(g, h, gam) + 0.5 * dtr
    second = geo.inner_covector(g, cov, geo.differential(f))
    return ScalarField(g.grid, -first.values + second.values)


@dataclass(frozen=True)
class QMatrix:
    """Compression of the operator derivative onto the kernel basis.

    ``entries`` is the symmetrized m×m matrix in the W-orthonormal basis
    carried by ``basis``; its eigenvalues are the first-order velocities of
    the m eigenvalue branches leaving zero.
    """

    m: int
    entries: np.ndarray
    basis: ops.SpectralDecomposition
    asymmetry: float

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)


def q_operator(
    g: MetricField,
    h: SymTensorField,
    c: float,
    tau: float | None = None,
    kernel_basis: ops.SpectralDecomposition | None = None,
    seed: int = 0,
) -> QMatrix:
    """Q_{ab} = (ψ_a, c·Ṙ·ψ_b - Δ̇ψ_b) over the kernel basis of -Δ_g + cR_g."""
    kdec = kernel_basis if kernel_basis is not None else ops.kernel(g, c, tau, seed=seed)
    m = kdec.k
    if m == 0:
        raise EmptyKernel("no eigenvalue inside the kernel tolerance; Q is undefined")
    gam = geo.christoffel(g)
    rdot = dot_scalar_curvature(g, h, gam)
    basis = [kdec.eigenfunction(b) for b in range(m)]
    entries = np.empty((m, m))
    for b, psi_b in enumerate(basis):
        ldot = dot_laplacian(g, h, psi_b, gam)
        image = ScalarField(g.grid, c * rdot.values * psi_b.values - ldot.values)
        for a, psi_a in enumerate(basis):
            entries[a, b] = geo.l2_inner(g, psi_a, image)
    sym = 0.5 * (entries + entries.T)
    denom = np.linalg.norm(sym)
    asym = float(np.linalg.norm(entries - entries.T) / denom) if denom > 0 else 0.0
    return QMatrix(m=m, entries=sym, basis=kdec, asymmetry=asym)


def eigenvalue_derivatives(
    g: MetricField,
    h: SymTensorField,
    c: float,
    tau: float | None = None,
    kernel_basis: ops.SpectralDecomposition | None = None,
    seed: int = 0,
) -> np.ndarray:
    """Sorted first-order velocities of the eigenvalue branches through 0."""
    return q_operator(g, h, c, tau, kernel_basis, seed).eigenvalues()


def kernel_breaking_tensor(g: MetricField, psi: ScalarField, c: float, gamma=None) -> SymTensorField:
    """The symmetric traceless direction
    h* = c (2ψ ∇̊²ψ - ψ² R̊ic) + (2c-1)(dψ⊗dψ)˚
    along which the zero eigenvalue moves with velocity ‖h*‖²/(ψ,ψ);
    it is the traceless projection of the integrand produced by pairing
    (cṘ - Δ̇)ψ with ψ and integrating by parts."""
    if any(c == v for v in ops.EXCLUDED_COUPLINGS):
        raise DisallowedCoupling(
            f"c = {c} is excluded: the first-order argument needs c != 0 and c != 1/2"
        )
    _same_grid(g.tensor, psi)
    gam = gamma or geo.christoffel(g)
    hess0 = geo.traceless(g, geo.hessian(g, psi, gam))
    ric0 = geo.traceless(g, geo.ricci(g, gam))
    dpsi = geo.differential(psi)
    grad0 = geo.traceless(g, geo.sym_outer(dpsi, dpsi))
    p = psi.values
    vals = c * (2.0 * p[None] * hess0.values - (p * p)[None] * ric0.values)
    vals = vals + (2.0 * c - 1.0) * grad0.values
    return SymTensorField(g.grid, vals)


@dataclass(frozen=True)
class IdentityReport:
    """Three evaluations of the first-order pairing A and their residuals."""

    direct: float          # ((cṘ - Δ̇)ψ, ψ)
    paired: float          # ∫⟨h, c(2ψ∇²ψ - ψ²Ric) + (2c-1)dψ⊗dψ⟩
    paired_traceless: float  # same integrand with traceless blocks
    scale: float

    @property
    def residuals(self) -> tuple[float, float, float]:
        return (
            abs(self.direct - self.paired),
            abs(self.direct - self.paired_traceless),
            abs(self.paired - self.paired_traceless),
        )

    @property
    def max_relative_residual(self) -> float:
        return max(self.residuals) / self.scale


def derivative_identity_check(
    g: MetricField, psi: ScalarField, h: SymTensorField, c: float, trace_tol: float = 1e-8
) -> IdentityReport:
    """Check the integration-by-parts chain relating the direct pairing
    ((cṘ - Δ̇)ψ, ψ) to the two explicit-integrand forms; requires tr_g h = 0."""
    _same_grid(g.tensor, psi, h)
    tr = geo.trace(g, h)
    hscale = h.max_abs()
    if hscale > 0 and tr.max_abs() > trace_tol * hscale:
        raise NotTraceless(
            f"max |tr_g h| = {tr.max_abs():.3e} exceeds {trace_tol:.1e} * max |h|"
        )
    gam = geo.christoffel(g)
    rdot = dot_scalar_curvature(g, h, gam)
    ldot = dot_laplacian(g, h, psi, gam)
    direct = geo.l2_inner(
        g, psi, ScalarField(g.grid, c * rdot.values * psi.values - ldot.values)
    )

    hess = geo.hessian(g, psi, gam)
    ric = geo.ricci(g, gam)
    dpsi = geo.differential(psi)
    grad = geo.sym_outer(dpsi, dpsi)
    p = psi.values

    def pairing(hess_part, ric_part, grad_part):
        vals = c * (2.0 * p[None] * hess_part.values - (p * p)[None] * ric_part.values)
        vals = vals + (2.0 * c - 1.0) * grad_part.values
        return geo.l2_inner_tensor(g, h, SymTensorField(g.grid, vals))

    paired = pairing(hess, ric, grad)
    paired0 = pairing(geo.traceless(g, hess), geo.traceless(g, ric), geo.traceless(g, grad))
    scale = max(abs(direct), abs(paired), abs(paired0), 1e-300)
    return IdentityReport(direct=direct, paired=paired, paired_traceless=paired0, scale=scale)


@dataclass(frozen=True)
class NodalReport:
    """Gradient statistics over the approximate nodal set of a field."""

    nodal_fraction: float
    gradient_min: float
    gradient_median: float
    below_threshold_fraction: float
    threshold: float
    nodal_nodes: int


def nodal_diagnostics(
    psi: ScalarField, g: MetricField | None = None, threshold: float | None = None
) -> NodalReport:
    """Locate sign-change cells of ψ and report |dψ|_g statistics there.

    Witnesses numerically that the differential does not vanish along the
    whole nodal set: the below-threshold fraction should shrink under grid
    refinement.  The metric defaults to flat.
    """
    grid = psi.grid
    v = psi.values
    if float(np.max(v) - np.min(v)) <= 1e-14 * max(1.0, float(np.max(np.abs(v)))):
        raise ConstantField("nodal diagnostics need a non-constant field")
    metric = g if g is not None else MetricField.flat(grid)
    _same_grid(metric.tensor, psi)
    # a node is nodal when some incident edge changes sign (or it is an
    # exact zero); this is the grid approximation of the zero set
    nodal = v == 0.0
    for axis in range(grid.dim):
        crossing = v * np.roll(v, -1, axis=axis) < 0
        nodal |= crossing
        nodal |= np.roll(crossing, 1, axis=axis)
    if not np.any(nodal):
        raise ConstantField("field does not change sign; nodal set is empty")
    dpsi = geo.differential(psi)
    grad_norm = np.sqrt(np.maximum(geo.inner_covector(metric, dpsi, dpsi).values, 0.0))
    thr = threshold if threshold is not None else 0.05 * float(np.max(grad_norm))
    on_nodal = grad_norm[nodal]
    return NodalReport(
        nodal_fraction=float(np.mean(nodal)),
        gradient_min=float(np.min(on_nodal)),
        gradient_median=float(np.median(on_nodal)),
        below_threshold_fraction=float(np.mean(on_nodal < thr)),
        threshold=float(thr),
        nodal_nodes=int(np.count_nonzero(nodal)),
    )


@dataclass
class BranchTrace:
    """Eigenvalue branches along a metric curve, matched by eigenvector
    overlap in the mass inner product of the later parameter value."""

    ts: np.ndarray                  # (T,)
    eigenvalues: np.ndarray         # (T, window), branch-indexed
    overlaps: np.ndarray            # (T-1, window)
    vectors: list[np.ndarray]       # per t: (N, window) branch-ordered columns
    taus: np.ndarray                # per-t kernel tolerance
    ambiguous: list[tuple[int, int, float]] = field(default_factory=list)

    @property
    def window(self) -> int:
        return self.eigenvalues.shape[1]

    def branch(self, b: int) -> np.ndarray:
        return self.eigenvalues[:, b]


def _match_branches(prev_lams, prev_vecs, new_dec):
    w = new_dec.w
    xw = prev_vecs * w[:, None]
    norms = np.sqrt(np.einsum("ik,ik->k", prev_vecs, xw))
    overlap = np.abs((xw / norms[None, :]).T @ new_dec.vectors)
    # eigenvalue-proximity tiebreak, weighted far below one unit of overlap
    lam = new_dec.eigenvalues
    spread = max(float(lam.max() - lam.min()), 1e-30)
    proximity = np.abs(prev_lams[:, None] - lam[None, :]) / spread
    row, col = linear_sum_assignment(-overlap + 1e-6 * proximity)
    return col, overlap[row, col]


def track_branch(
    curve: MetricCurve,
    c: float,
    t_grid,
    window: int,
    seed: int = 0,
    method: str = "auto",
    keep_vectors: bool = True,
) -> BranchTrace:
    """Eigenpairs of -Δ + cR along the curve with branch labels.

    Branches are matched across adjacent t by maximal mass-weighted
    eigenvector overlap (assignment problem); matches with best overlap
    below 0.5 are recorded as ambiguous and warned about, not guessed away.
    """
    ts = np.asarray(list(t_grid), dtype=float)
    if ts.size < 1:
        raise ValueError("t_grid must be nonempty")
    lams = np.empty((ts.size, window))
    overlaps = np.empty((max(ts.size - 1, 0), window))
    taus = np.empty(ts.size)
    vectors: list[np.ndarray] = []
    ambiguous: list[tuple[int, int, float]] = []
    prev = None
    for step, t in enumerate(ts):
        try:
            gt = curve.metric_at(t)
        except SingularMetric as err:
            raise SPDViolation(f"curve leaves the SPD cone at t = {t}: {err}") from err
        pair = ops.assemble(gt, c)
        dec = ops.eig_lowest(pair, window, method=method, seed=seed)
        if prev is None:
            lams[step] = dec.eigenvalues
            vecs = dec.vectors
        else:
            perm, ov = _match_branches(lams[step - 1], prev, dec)
            lams[step] = dec.eigenvalues[perm]
            vecs = dec.vectors[:, perm]
            overlaps[step - 1] = ov
            for b, o in enumerate(ov):
                if o < 0.5:
                    ambiguous.append((step, b, float(o)))
            if any(o < 0.5 for o in ov):
                warnings.warn(
                    f"branch matching ambiguous at t = {t}: min overlap {ov.min():.3f}",
                    BranchAmbiguity,
                )
        taus[step] = dec.kernel_tol
        vectors.append(vecs if keep_vectors else np.empty((0, 0)))
        prev = vecs
    return BranchTrace(
        ts=ts, eigenvalues=lams, overlaps=overlaps, vectors=vectors, taus=taus, ambiguous=ambiguous
    )


@dataclass(frozen=True)
class KernelMetricResult:
    t_star: float
    metric: MetricField
    psi: ScalarField
    eigenvalue: float
    decomposition: ops.SpectralDecomposition
    tolerance: float


def find_kernel_metric(
    curve: MetricCurve,
    c: float,
    branch_index: int,
    t_grid,
    window: int | None = None,
    tol: float | None = None,
    seed: int = 0,
    max_bisect: int = 80,
) -> KernelMetricResult:
    """Bisect a sign-changing eigenvalue branch down to |λ(t*)| < tolerance.

    The sign change is detected on the tracked branch; the bisection itself
    contracts onto a jump of the negative-eigenvalue count, which by
    continuity of the ordered eigenvalues pins a zero crossing regardless of
    how branches reshuffle inside the bracket.  Returns the crossing metric
    together with the crossing eigenfunction (the eigenpair nearest zero).
    """
    window = window or branch_index + 4
    trace = track_branch(curve, c, t_grid, window, seed=seed)
    lam = trace.branch(branch_index)
    sign_change = np.flatnonzero(lam[:-1] * lam[1:] <= 0)
    if sign_change.size == 0:
        raise NoSignChange(
            f"branch {branch_index} keeps sign over the t-grid "
            f"(range [{lam.min():.4g}, {lam.max():.4g}])"
        )
    i = int(sign_change[0])
    t_lo, t_hi = float(trace.ts[i]), float(trace.ts[i + 1])
    neg_lo = int(np.sum(np.sort(trace.eigenvalues[i]) < 0.0))

    def solve(t):
        pair = ops.assemble(curve.metric_at(t), c)
        return ops.eig_lowest(pair, window, seed=seed)

    best = None
    for _ in range(max_bisect):
        t_mid = 0.5 * (t_lo + t_hi)
        dec = solve(t_mid)
        idx = int(np.argmin(np.abs(dec.eigenvalues)))
        lam_mid = dec.eigenvalues[idx]
        eff_tol = tol if tol is not None else dec.kernel_tol
        if best is None or abs(lam_mid) < abs(best[2]):
            best = (t_mid, dec, lam_mid, idx)
        if abs(lam_mid) < eff_tol:
            best = (t_mid, dec, lam_mid, idx)
            break
        if int(np.sum(dec.eigenvalues < 0.0)) == neg_lo:
            t_lo = t_mid
        else:
            t_hi = t_mid
    else:
        t_mid, dec, lam_mid, idx = best
        if abs(lam_mid) >= (tol if tol is not None else dec.kernel_tol):
            raise ConvergenceFailure(
                f"bisection stalled at |λ| = {abs(lam_mid):.3e}",
                residual=float(abs(lam_mid)),
                iterations=max_bisect,
            )
    t_star, dec, lam_star, idx = best
    psi = dec.eigenfunction(idx)
    return KernelMetricResult(
        t_star=float(t_star),
        metric=curve.metric_at(t_star),
        psi=psi,
        eigenvalue=float(lam_star),
        decomposition=dec,
        tolerance=float(tol if tol is not None else dec.kernel_tol),
    )


@dataclass(frozen=True)
class BreakKernelResult:
    metric: MetricField
    multiplicity_trace: tuple[int, ...]
    steps: tuple[dict, ...]


def break_kernel(
    g0: MetricField,
    c: float,
    tau: float,
    eps: float,
    seed: int = 0,
    max_levels: int = 20,
    degenerate_tol: float = 1e-8,
) -> BreakKernelResult:
    """Iteratively empty the kernel of -Δ + cR by first-order pushes.

    At each round: take the kernel eigenfunction with the largest breaking
    tensor, step the metric along ±ε·2^{-j} (geometric grid, largest step
    first), and accept the first step that strictly drops the multiplicity.
    Raises FirstOrderDegenerate when every kernel mode yields a vanishing
    tensor, and LineSearchFailure when no step drops the multiplicity.
    """
    if any(c == v for v in ops.EXCLUDED_COUPLINGS):
        raise DisallowedCoupling(f"c = {c} is excluded (c != 0, c != 1/2)")
    g = g0
    trace: list[int] = []
    steps: list[dict] = []
    while True:
        kdec = ops.kernel(g, c, tau, seed=seed)
        m = kdec.k
        trace.append(m)
        if m == 0:
            return BreakKernelResult(metric=g, multiplicity_trace=tuple(trace), steps=tuple(steps))
        gam = geo.christoffel(g)
        tensors = [kernel_breaking_tensor(g, kdec.eigenfunction(a), c, gam) for a in range(m)]
        norms = [geo.l2_norm_tensor(g, ht) for ht in tensors]
        a_best = int(np.argmax(norms))
        if norms[a_best] <= degenerate_tol:
            raise FirstOrderDegenerate(
                f"all {m} kernel modes give ‖h*‖ <= {degenerate_tol:.1e}; "
                "no first-order direction moves the zero eigenvalue"
            )
        hstar = tensors[a_best]
        accepted = None
        for level in range(max_levels):
            t_abs = eps * 0.5**level
            for t in (t_abs, -t_abs):
                try:
                    g_t = MetricField(
                        SymTensorField(g.grid, g.tensor.values + t * hstar.values)
                    )
                except SingularMetric:
                    continue
                m_t = ops.kernel(g_t, c, tau, seed=seed).k
                if m_t < m:
                    accepted = (t, g_t, m_t)
                    break
            if accepted:
                break
        if accepted is None:
            qmat = q_operator(g, hstar, c, tau, kernel_basis=kdec, seed=seed)
            raise LineSearchFailure(
                f"multiplicity {m} never dropped for |t| <= {eps}", q_matrix=qmat
            )
        t, g, m_after = accepted
        steps.append(
            {
                "multiplicity": m,
                "step": float(t),
                "tensor_norm": float(norms[a_best]),
                "new_multiplicity": int(m_after),
            }
        )
