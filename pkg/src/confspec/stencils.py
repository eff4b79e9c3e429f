"""Central finite-difference stencils on periodic axes.

Second- and fourth-order central differences, applied with numpy rolls so
periodic wrap is exact.  The same coefficient tables are used to build the
sparse matrix form of the operators in :mod:`confspec.operators`.
"""

from __future__ import annotations

import numpy as np

# offset -> coefficient, excluding the h / h^2 denominators
FIRST = {
    2: {-1: -0.5, 1: 0.5},
    4: {-2: 1.0 / 12.0, -1: -8.0 / 12.0, 1: 8.0 / 12.0, 2: -1.0 / 12.0},
}
SECOND = {
    2: {-1: 1.0, 0: -2.0, 1: 1.0},
    4: {-2: -1.0 / 12.0, -1: 16.0 / 12.0, 0: -30.0 / 12.0, 1: 16.0 / 12.0, 2: -1.0 / 12.0},
}


def _apply(values: np.ndarray, axis: int, coeffs: dict[int, float], scale: float) -> np.ndarray:
    # Written as sum of c_k (f(x+kh) - f(x)) so constant fields map to exact
    # zero; the center coefficient always equals -sum of the others.
    out = np.zeros_like(values)
    for offset, c in coeffs.items():
        if offset == 0:
            continue
        # roll(-k) puts f(x + k h) at position x
        out += c * (np.roll(values, -offset, axis=axis) - values)
    return out * scale


def diff1(values: np.ndarray, axis: int, spacing: float, order: int) -> np.ndarray:
    """First derivative along a periodic axis."""
    return _apply(values, axis, FIRST[order], 1.0 / spacing)


def diff2(values: np.ndarray, axis: int, spacing: float, order: int) -> np.ndarray:
    """Second derivative along a periodic axis (tight central stencil)."""
    return _apply(values, axis, SECOND[order], 1.0 / spacing**2)


def stencil_coefficients(kind: str, order: int, spacing: float) -> dict[int, float]:
    """Offset -> coefficient table including the grid-spacing denominator."""
    table = FIRST[order] if kind == "first" else SECOND[order]
    scale = 1.0 / spacing if kind == "first" else 1.0 / spacing**2
    return {k: c * scale for k, c in table.items()}
