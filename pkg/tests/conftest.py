"""Shared fixtures: the frozen kernel-crossing metric and field helpers.

The kernel fixture is expensive (a branch-crossing bisection), so it is
built once per session at two resolutions: a coarse 8^3 version for unit
tests and the 12^3 version used by the acceptance suite.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import pytest

from confspec import operators as ops
from confspec import perturbation as pert
from confspec import recipes
from confspec.errors import BranchAmbiguity
from confspec.grids import Grid, MetricField, ScalarField, SymTensorField

# frozen fixture recipe: flat base scaled by METRIC_SCALE, seeded traceless
# direction, generalized coupling well away from {0, 1/2}; the second branch
# crosses zero near t* = 0.106 at every tested resolution
FIXTURE_COUPLING = 20.0
METRIC_SCALE = 50.0
DIRECTION_SEED = 0
DIRECTION_AMPLITUDE = 0.6
T_SEARCH = np.linspace(0.02, 0.4, 8)
BRANCH = 1
WINDOW = 8


@dataclass
class KernelFixture:
    grid: Grid
    curve: pert.MetricCurve
    metric: MetricField
    psi: ScalarField
    t_star: float
    eigenvalue: float
    tolerance: float
    kernel: ops.SpectralDecomposition
    coupling: float


def direction_for(grid: Grid) -> SymTensorField:
    h = recipes.random_traceless_direction(
        grid, DIRECTION_SEED, DIRECTION_AMPLITUDE, max_frequency=1, modes=4
    )
    return SymTensorField(grid, METRIC_SCALE * h.values)


def curve_for(grid: Grid) -> pert.MetricCurve:
    return pert.MetricCurve(MetricField.flat(grid, METRIC_SCALE), direction_for(grid))


def build_kernel_fixture(nside: int) -> KernelFixture:
    grid = Grid((nside,) * 3, (1.0,) * 3)
    curve = curve_for(grid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BranchAmbiguity)
        found = pert.find_kernel_metric(
            curve, FIXTURE_COUPLING, BRANCH, T_SEARCH, window=WINDOW, seed=0
        )
    kdec = ops.kernel(found.metric, FIXTURE_COUPLING, seed=0)
    assert kdec.k >= 1, "fixture must carry a numerical kernel"
    return KernelFixture(
        grid=grid,
        curve=curve,
        metric=found.metric,
        psi=found.psi,
        t_star=found.t_star,
        eigenvalue=found.eigenvalue,
        tolerance=found.tolerance,
        kernel=kdec,
        coupling=FIXTURE_COUPLING,
    )


@pytest.fixture(scope="session")
def kernel_fixture_coarse() -> KernelFixture:
    return build_kernel_fixture(8)


@pytest.fixture(scope="session")
def kernel_fixture() -> KernelFixture:
    return build_kernel_fixture(12)


def trig_scalar_field(grid: Grid, seed: int, amplitude: float, modes: int = 4) -> ScalarField:
    return recipes.trig_scalar(grid, seed, amplitude, max_frequency=1, modes=modes)


def random_traceless(grid: Grid, seed: int, amplitude: float) -> SymTensorField:
    return recipes.random_traceless_direction(grid, seed, amplitude, max_frequency=1, modes=4)


def perturbed_metric(grid: Grid, seed: int, amplitude: float, t: float = 1.0) -> MetricField:
    return recipes.perturbed_flat_metric(grid, seed, amplitude, t)
