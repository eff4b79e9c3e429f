"""Spectral composition of product metrics at the level of abstract spectra.

A product of a positive-curvature base with a shrinking hyperbolic surface
carries the conformal Laplacian

    -Δ_base - t Δ_fiber + c_{d+2} (R_G - 2t),

so its spectrum is the set of sums μ_i + t λ_j + shift over the component
spectra.  Components are represented by truncated eigenvalue lists; genuine
hyperbolic spectra are out of reach at desk scale, so the fiber is a
synthesized surrogate with the advertised cluster just above 1/4 and a
planar Weyl tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyAdmissibleSet,
    InvalidParameters,
    NonNegativeScalarCurvature,
    TruncationInadequate,
)
from .operators import coupling_constant


@dataclass(frozen=True)
class AbstractSpectrum:
    """Truncated Laplacian spectrum of a closed manifold.

    ``eigenvalues`` is ascending, starts at 0 (constants), and every omitted
    eigenvalue exceeds ``truncation_bound``.  ``scalar_curvature`` is the
    constant scalar curvature of the model.
    """

    eigenvalues: tuple[float, ...]
    dim: int
    scalar_curvature: float
    truncation_bound: float

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        if lam.size == 0:
            raise InvalidParameters("spectrum must contain at least the zero mode")
        if abs(lam[0]) > 1e-12:
            raise InvalidParameters(f"first eigenvalue must be 0, got {lam[0]}")
        if np.any(np.diff(lam) < 0):
            raise InvalidParameters("eigenvalues must be ascending")
        if np.any(lam > self.truncation_bound + 1e-12):
            raise InvalidParameters("eigenvalues exceed the truncation bound")
        object.__setattr__(self, "eigenvalues", tuple(float(v) for v in lam))

    @property
    def count(self) -> int:
        return len(self.eigenvalues)

    def count_below(self, s: float) -> int:
        return int(np.sum(np.asarray(self.eigenvalues) < s))


def sphere_spectrum(d: int, l_max: int) -> AbstractSpectrum:
    """Round d-sphere: eigenvalues l(l+d-1) with harmonic multiplicities,
    scalar curvature d(d-1)."""
    if d < 2:
        raise InvalidParameters(f"sphere dimension must be >= 2, got {d}")
    if l_max < 0:
        raise InvalidParameters("l_max must be nonnegative")
    values: list[float] = []
    for l in range(l_max + 1):
        mult = math.comb(l + d, d) - math.comb(l + d - 2, d)
        values.extend([float(l * (l + d - 1))] * mult)
    return AbstractSpectrum(
        eigenvalues=tuple(values),
        dim=d,
        scalar_curvature=float(d * (d - 1)),
        truncation_bound=float(l_max * (l_max + d - 1)),
    )


def buser_surrogate_spectrum(
    k: int, eps: float, genus: int, seed: int, lam_max: float = 12.0
) -> AbstractSpectrum:
    """Synthesized spectrum of a pinched hyperbolic surface of the given
    genus: zero, k seeded values in (1/4, 1/4+eps), and a Weyl-law tail
    (count ≈ area·λ/4π with area 4π(genus-1)) above 1/4+eps up to lam_max.

    Only the spectrum is synthesized; no surface is constructed.
    """
    if genus < 2:
        raise InvalidParameters(f"genus must be >= 2, got {genus}")
    if not 0.0 < eps < 1.0 / 12.0:
        raise InvalidParameters(f"eps must lie in (0, 1/12), got {eps}")
    if k < 1:
        raise InvalidParameters(f"k must be >= 1, got {k}")
    if lam_max <= 0.25 + eps:
        raise InvalidParameters("lam_max must exceed 1/4 + eps")
    rng = np.random.default_rng(seed)
    cluster = np.sort(0.25 + eps * rng.uniform(0.0, 1.0, size=k))
    cluster = np.clip(cluster, np.nextafter(0.25, 1.0), np.nextafter(0.25 + eps, 0.25))
    density = genus - 1  # planar Weyl density: N(λ) ≈ (γ-1) λ
    tail = []
    j = math.floor((0.25 + eps) * density) + 1
    while True:
        lam = j / density
        jitter = 0.2 / density * rng.uniform(-1.0, 1.0)
        value = max(lam + jitter, 0.25 + eps + 1e-9)
        if value > lam_max:
            break
        tail.append(value)
        j += 1
    values = (0.0,) + tuple(cluster) + tuple(sorted(tail))
    return AbstractSpectrum(
        eigenvalues=values, dim=2, scalar_curvature=-2.0, truncation_bound=float(lam_max)
    )


@dataclass(frozen=True)
class ProductSpec:
    """Data of the product construction: positive-curvature base spectrum,
    pinched-surface fiber spectrum, fiber scaling t, cluster width eps, and
    the target count k of designated fiber modes."""

    base: AbstractSpectrum
    fiber: AbstractSpectrum
    t: float
    eps: float
    k: int

    def __post_init__(self):
        if self.base.scalar_curvature <= 0:
            raise InvalidParameters("base must have positive scalar curvature")
        if self.base.dim < 2:
            raise InvalidParameters("base dimension must be >= 2")
        if self.fiber.dim != 2 or abs(self.fiber.scalar_curvature + 2.0) > 1e-12:
            raise InvalidParameters("fiber must be a hyperbolic surface (dim 2, R = -2)")
        if self.t <= 0 or self.eps <= 0:
            raise InvalidParameters("t and eps must be positive")
        if len(designated_modes(self.fiber, self.eps, self.k)) < self.k:
            raise InvalidParameters(
                f"fiber must carry >= {self.k} eigenvalues in (1/4, 1/4+eps)"
            )

    @property
    def d(self) -> int:
        return self.base.dim

    @property
    def total_dim(self) -> int:
        return self.base.dim + 2


def designated_modes(fiber: AbstractSpectrum, eps: float, k: int | None = None) -> tuple[float, ...]:
    """Fiber eigenvalues in (1/4, 1/4+eps); the first k of them when k given."""
    lam = [v for v in fiber.eigenvalues if 0.25 < v < 0.25 + eps]
    return tuple(lam if k is None else lam[:k])


def conformal_shift(d: int, r_base: float, t: float) -> float:
    """The constant potential d(R_G - 2t)/(4(d+1)) = c_{d+2} (R_G - 2t)."""
    return coupling_constant(d + 2) * (r_base - 2.0 * t)


def product_scalar_curvature(spec: ProductSpec) -> float:
    """R_G - 2t (the fiber has Gauss curvature -1 at every pinching stage)."""
    return spec.base.scalar_curvature - 2.0 * spec.t


def product_conformal_spectrum(spec: ProductSpec) -> np.ndarray:
    """All sums μ_i + t λ_j + shift over the truncated component spectra.

    Raises TruncationInadequate when an omitted component eigenvalue could
    produce a negative sum (truncation bounds must exceed |shift|)."""
    shift = conformal_shift(spec.d, spec.base.scalar_curvature, spec.t)
    if shift < 0.0:
        if spec.base.truncation_bound < -shift:
            raise TruncationInadequate(
                f"base truncation {spec.base.truncation_bound} below |shift| = {-shift}"
            )
        if spec.t * spec.fiber.truncation_bound < -shift:
            raise TruncationInadequate(
                f"scaled fiber truncation {spec.t * spec.fiber.truncation_bound} "
                f"below |shift| = {-shift}"
            )
    mu = np.asarray(spec.base.eigenvalues)
    lam = np.asarray(spec.fiber.eigenvalues)
    sums = mu[:, None] + spec.t * lam[None, :] + shift
    return np.sort(sums.ravel())


def negative_count(spec: ProductSpec) -> int:
    return int(np.sum(product_conformal_spectrum(spec) < 0.0))


@dataclass(frozen=True)
class AdmissibilityRow:
    t: float
    negative_designated: int
    admissible: bool
    printed_bound_admits: bool
    corrected_bound_admits: bool

    @property
    def printed_bound_disagrees(self) -> bool:
        return self.printed_bound_admits != self.admissible


@dataclass(frozen=True)
class AdmissibilityReport:
    rows: tuple[AdmissibilityRow, ...]
    lower_bound: float          # t > R_G/2 makes the scalar curvature negative
    printed_upper_bound: float  # the closed form as printed: t < R_G d/(d-1-4eps(d+1))
    corrected_bound: float      # direct evaluation shows t > the same value suffices
    k: int

    @property
    def admissible_t(self) -> tuple[float, ...]:
        return tuple(r.t for r in self.rows if r.admissible)

    @property
    def printed_bound_disagreement(self) -> bool:
        return any(r.printed_bound_disagrees for r in self.rows)


def admissible_t(
    base: AbstractSpectrum, fiber: AbstractSpectrum, k: int, eps: float, t_values
) -> AdmissibilityReport:
    """Which t make all k designated fiber modes negative for the product
    conformal Laplacian.

    Direct per-t evaluation of t λ + shift < 0 is the source of truth.  The
    closed-form bounds are reported for comparison: the admissibility
    inequality solves to t GREATER than R_G d/(d-1-4eps(d+1)), while the
    same expression is printed as an upper bound in the source construction;
    rows where the printed form disagrees with direct evaluation are flagged.
    """
    d = base.dim
    if not 0.0 < eps < (d - 1) / (4.0 * (d + 1)):
        raise InvalidParameters(
            f"eps must lie in (0, {(d - 1) / (4.0 * (d + 1)):.4f}) for dimension d = {d}"
        )
    modes = designated_modes(fiber, eps, k)
    if len(modes) < k:
        raise InvalidParameters(f"fiber carries only {len(modes)} designated modes, need {k}")
    r_base = base.scalar_curvature
    bound = r_base * d / (d - 1 - 4.0 * eps * (d + 1))
    rows = []
    for t in t_values:
        t = float(t)
        shift = conformal_shift(d, r_base, t)
        neg = sum(1 for lam in modes if t * lam + shift < 0.0)
        rows.append(
            AdmissibilityRow(
                t=t,
                negative_designated=neg,
                admissible=neg >= k,
                printed_bound_admits=(r_base / 2.0 < t < bound),
                corrected_bound_admits=(t > bound),
            )
        )
    report = AdmissibilityReport(
        rows=tuple(rows),
        lower_bound=r_base / 2.0,
        printed_upper_bound=bound,
        corrected_bound=bound,
        k=k,
    )
    if not report.admissible_t:
        raise EmptyAdmissibleSet(
            f"no t among {len(rows)} samples makes all {k} designated modes negative"
        )
    return report


def yamabe_rescale(eigenvalues, r_before: float) -> tuple[np.ndarray, float]:
    """Homothety normalizing constant scalar curvature to -1: divides every
    eigenvalue by -r_before and preserves all sign counts."""
    if r_before >= 0.0:
        raise NonNegativeScalarCurvature(
            f"rescaling to R = -1 needs negative scalar curvature, got {r_before}"
        )
    factor = -r_before
    return np.asarray(eigenvalues, dtype=float) / factor, -1.0


@dataclass(frozen=True)
class FamilyRecord:
    """Per-metric metadata of a degenerating product family (declared
    surrogate geometry, not computed)."""

    k: int
    negative_count: int
    volume: float | None = None
    injectivity_radius: float | None = None
    ricci_lower: float | None = None
    diameter: float | None = None


def _trend_to_zero(values: list[float]) -> bool:
    if len(values) < 3:
        return False
    v = np.asarray(values)
    return bool(np.all(np.diff(v) <= 1e-12) and v[-1] <= 0.25 * v[0])


def _trend_unbounded(values: list[float]) -> bool:
    if len(values) < 3:
        return False
    v = np.asarray(values)
    return bool(np.all(np.diff(v) >= -1e-12) and v[-1] >= 2.0 * v[0])


@dataclass(frozen=True)
class PrecompactnessReport:
    condition_volume_inj_ricci: bool | None
    condition_diam_ricci: bool | None
    reasons: tuple[str, ...]
    negative_counts: tuple[int, ...]

    @property
    def noncompactness_consistent(self) -> bool:
        """Growing negative counts must come with both conditions failing."""
        counts = self.negative_counts
        growing = len(counts) >= 2 and counts[-1] > counts[0]
        return (not growing) or (
            self.condition_volume_inj_ricci is False and self.condition_diam_ricci is False
        )


def check_precompactness(records: list[FamilyRecord]) -> PrecompactnessReport:
    """Can uniform constants satisfy either pre-compactness condition along
    the sequence?

    Condition A needs volume bounded above, injectivity radius bounded away
    from zero, and Ricci bounded below; condition B needs diameter bounded
    above and Ricci bounded below.  For a finite sequence the verdict is a
    trend judgment: a monotone injectivity radius collapsing by more than
    4x is treated as inj -> 0 (no uniform r > 0 exists), and a monotone
    quantity growing by more than 2x as unbounded (the declared surrogate
    diameters grow only logarithmically in the mode count).
    """
    if not records:
        raise InvalidParameters("need at least one record")
    reasons: list[str] = []

    def column(name):
        vals = [getattr(r, name) for r in records]
        return None if any(v is None for v in vals) else [float(v) for v in vals]

    vol, inj, ric, diam = (column(n) for n in ("volume", "injectivity_radius", "ricci_lower", "diameter"))

    ricci_unbounded = ric is not None and _trend_unbounded([-v for v in ric])
    if ricci_unbounded:
        reasons.append(f"Ricci lower bound diverges ({ric[0]:.4g} -> {ric[-1]:.4g})")

    cond_a: bool | None
    if vol is None or inj is None or ric is None:
        cond_a = None
        reasons.append("condition A not evaluated: missing volume/injectivity/Ricci data")
    else:
        cond_a = not ricci_unbounded
        if _trend_to_zero(inj):
            cond_a = False
            reasons.append(
                f"injectivity radius collapses ({inj[0]:.4g} -> {inj[-1]:.4g}); no uniform r > 0"
            )
        if _trend_unbounded(vol):
            cond_a = False
            reasons.append(f"volume grows unboundedly ({vol[0]:.4g} -> {vol[-1]:.4g})")

    cond_b: bool | None
    if diam is None or ric is None:
        cond_b = None
        reasons.append("condition B not evaluated: missing diameter/Ricci data")
    else:
        cond_b = not ricci_unbounded
        if _trend_unbounded(diam):
            cond_b = False
            reasons.append(
                f"diameter grows unboundedly ({diam[0]:.4g} -> {diam[-1]:.4g}); no uniform D"
            )

    return PrecompactnessReport(
        condition_volume_inj_ricci=cond_a,
        condition_diam_ricci=cond_b,
        reasons=tuple(reasons),
        negative_counts=tuple(r.negative_count for r in records),
    )


def pinching_family(
    k_values,
    eps: float,
    genus: int,
    seed: int,
    t: float,
    base: AbstractSpectrum,
) -> list[FamilyRecord]:
    """Product family with growing designated-mode count k.

    Negative counts come from the product spectrum; the geometric metadata
    is declared surrogate data modeling the pinching degeneration: the
    injectivity radius shrinks like 1/k while the diameter grows like
    log(1+k) (thin collars lengthen), volume and the Ricci lower bound stay
    fixed.
    """
    records = []
    for i, k in enumerate(k_values):
        fiber = buser_surrogate_spectrum(int(k), eps, genus, seed + i)
        spec = ProductSpec(base=base, fiber=fiber, t=t, eps=eps, k=int(k))
        records.append(
            FamilyRecord(
                k=int(k),
                negative_count=negative_count(spec),
                volume=4.0 * np.pi * (genus - 1),
                injectivity_radius=1.0 / float(k),
                ricci_lower=-1.0,
                diameter=2.0 + 2.0 * np.log1p(float(k)),
            )
        )
    return records


def spectrum_to_csv(path, spectrum: AbstractSpectrum) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(
            f"# dim={spectrum.dim} scalar_curvature={spectrum.scalar_curvature:.17g} "
            f"truncation_bound={spectrum.truncation_bound:.17g}\n"
        )
        fh.write("eigenvalue\n")
        for v in spectrum.eigenvalues:
            fh.write(f"{v:.17g}\n")


def spectrum_from_csv(path) -> AbstractSpectrum:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ValueError("spectrum CSV must start with a metadata comment line")
        meta = dict(item.split("=", 1) for item in header[1:].split())
        column = fh.readline().strip()
        if column != "eigenvalue":
            raise ValueError(f"unexpected column header {column!r}")
        values = tuple(float(line) for line in fh if line.strip())
    return AbstractSpectrum(
        eigenvalues=values,
        dim=int(meta["dim"]),
        scalar_curvature=float(meta["scalar_curvature"]),
        truncation_bound=float(meta["truncation_bound"]),
    )
