"""Reproducible field and metric recipes.

Every recipe is an analytic trigonometric expression determined by a seed,
so the same recipe can be sampled on any grid (fixtures can be rebuilt at a
finer resolution without shipping binary fields).
"""

from __future__ import annotations

import numpy as np

from . import geometry as geo
from .errors import ConfigError
from .grids import Grid, MetricField, ScalarField, SymTensorField


def _trig_table(rng, modes: int, max_frequency: int, dim: int):
    """Draw (wave vector, phase, coefficient) triples; coefficients are
    normalized to unit absolute sum so amplitudes are grid-independent."""
    ks = rng.integers(-max_frequency, max_frequency + 1, size=(modes, dim))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=modes)
    coeffs = rng.uniform(-1.0, 1.0, size=modes)
    total = np.sum(np.abs(coeffs))
    if total > 0:
        coeffs = coeffs / total
    return ks, phases, coeffs


def _eval_trig(grid: Grid, ks, phases, coeffs) -> np.ndarray:
    x = grid.coordinates().reshape(grid.dim, -1)
    vals = np.zeros(grid.num_nodes)
    for k, ph, a in zip(ks, phases, coeffs):
        frac = (k / np.asarray(grid.period)) @ x
        vals += a * np.cos(2.0 * np.pi * frac + ph)
    return vals.reshape(grid.shape)


def trig_scalar(
    grid: Grid, seed: int, amplitude: float, max_frequency: int = 1, modes: int = 4, offset: float = 0.0
) -> ScalarField:
    """Seeded trigonometric polynomial with |values - offset| <= amplitude."""
    rng = np.random.default_rng(seed)
    table = _trig_table(rng, modes, max_frequency, grid.dim)
    return ScalarField(grid, offset + amplitude * _eval_trig(grid, *table))


def random_traceless_direction(
    grid: Grid, seed: int, amplitude: float, max_frequency: int = 1, modes: int = 4
) -> SymTensorField:
    """Seeded symmetric trigonometric tensor, projected traceless against
    the flat metric (pointwise algebra, so grid-independent)."""
    rng = np.random.default_rng(seed)
    n = grid.dim
    comps = []
    for _ in range(n * (n + 1) // 2):
        table = _trig_table(rng, modes, max_frequency, n)
        comps.append(amplitude * _eval_trig(grid, *table))
    raw = SymTensorField(grid, np.stack(comps))
    return geo.traceless(MetricField.flat(grid), raw)


def flat_metric(grid: Grid, scale: float = 1.0) -> MetricField:
    if scale <= 0:
        raise ConfigError("flat metric scale must be positive")
    return MetricField.flat(grid, scale)


def conformal_metric_from_fourier(
    grid: Grid,
    modes: list | None = None,
    seed: int | None = None,
    amplitude: float = 0.1,
    max_frequency: int = 1,
    n_modes: int = 4,
) -> MetricField:
    """g = e^{2φ} δ with φ either an explicit mode list
    [[k_1..k_n], amplitude, phase] or a seeded trigonometric polynomial."""
    if modes is not None:
        x = grid.coordinates().reshape(grid.dim, -1)
        phi = np.zeros(grid.num_nodes)
        for entry in modes:
            k, a, ph = entry
            frac = (np.asarray(k, dtype=float) / np.asarray(grid.period)) @ x
            phi += float(a) * np.cos(2.0 * np.pi * frac + float(ph))
        phi = phi.reshape(grid.shape)
    elif seed is not None:
        phi = trig_scalar(grid, seed, amplitude, max_frequency, n_modes).values
    else:
        raise ConfigError("conformal metric needs either explicit modes or a seed")
    factor = np.exp(2.0 * phi)
    vals = MetricField.flat(grid).tensor.values * factor[None]
    return MetricField(SymTensorField(grid, vals))


def perturbed_flat_metric(
    grid: Grid, seed: int, amplitude: float, t: float = 1.0, max_frequency: int = 1, modes: int = 4
) -> MetricField:
    """flat + t * (seeded random traceless direction)."""
    h = random_traceless_direction(grid, seed, amplitude, max_frequency, modes)
    vals = MetricField.flat(grid).tensor.values + t * h.values
    return MetricField(SymTensorField(grid, vals))


METRIC_RECIPES = ("flat", "constant-conformal", "fourier-conformal", "random-traceless")


def metric_from_recipe(grid: Grid, spec: dict) -> MetricField:
    """Build a metric from a config-style recipe record."""
    recipe = spec.get("recipe")
    if recipe == "flat":
        return flat_metric(grid, float(spec.get("scale", 1.0)))
    if recipe == "constant-conformal":
        return flat_metric(grid, float(spec.get("scale", 2.0)))
    if recipe == "fourier-conformal":
        return conformal_metric_from_fourier(
            grid,
            modes=spec.get("fourier_modes"),
            seed=spec.get("seed"),
            amplitude=float(spec.get("amplitude", 0.1)),
            max_frequency=int(spec.get("max_frequency", 1)),
            n_modes=int(spec.get("modes", 4)),
        )
    if recipe == "random-traceless":
        return perturbed_flat_metric(
            grid,
            seed=int(spec.get("seed", 0)),
            amplitude=float(spec.get("amplitude", 0.1)),
            t=float(spec.get("t", 1.0)),
            max_frequency=int(spec.get("max_frequency", 1)),
            modes=int(spec.get("modes", 4)),
        )
    raise ConfigError(f"unknown metric recipe {recipe!r}; expected one of {METRIC_RECIPES}")


def fourier_resample(field: ScalarField, shape: tuple[int, ...]) -> ScalarField:
    """Trigonometric interpolation of a periodic scalar field onto a new
    resolution (zero-padding in Fourier space)."""
    from itertools import product

    grid = field.grid
    new_grid = grid.with_shape(shape)
    old_shape = field.values.shape
    if any(n_new < n_old for n_new, n_old in zip(shape, old_shape)):
        raise ValueError("fourier_resample only upsamples")
    spec = np.fft.fftn(field.values)
    out = np.zeros(shape, dtype=complex)
    for idx in np.ndindex(*old_shape):
        options = []
        for i, n_old, n_new in zip(idx, old_shape, shape):
            f = i if i <= n_old // 2 else i - n_old
            if n_old % 2 == 0 and i == n_old // 2 and n_new > n_old:
                # split the Nyquist bin across ±n/2 to keep the interpolant real
                options.append(((f % n_new, 0.5), ((-f) % n_new, 0.5)))
            else:
                options.append(((f % n_new, 1.0),))
        for combo in product(*options):
            target = tuple(c[0] for c in combo)
            weight = np.prod([c[1] for c in combo])
            out[target] += weight * spec[idx]
    vals = np.fft.ifftn(out).real * (np.prod(shape) / np.prod(old_shape))
    return ScalarField(new_grid, vals)
