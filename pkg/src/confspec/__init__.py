"""Spectral toolkit for conformal Laplacians on discretized tori.

Computes spectra of -Δ_g + c R_g on periodic grids, first-order eigenvalue
perturbation along metric curves (including the explicit traceless direction
that moves a zero eigenvalue), and the product-spectrum construction of
metrics with many negative eigenvalues.
"""

__version__ = "0.1.0"

from .grids import (
    ChristoffelField,
    CovectorField,
    Grid,
    MetricField,
    ScalarField,
    SymTensorField,
)
from .operators import (
    OperatorPair,
    SpectralDecomposition,
    assemble,
    conformal_covariance_check,
    count_below,
    coupling_constant,
    eig_lowest,
    kernel,
)
from .perturbation import (
    MetricCurve,
    QMatrix,
    break_kernel,
    derivative_identity_check,
    dot_laplacian,
    dot_scalar_curvature,
    eigenvalue_derivatives,
    find_kernel_metric,
    kernel_breaking_tensor,
    nodal_diagnostics,
    q_operator,
    track_branch,
)
from .products import (
    AbstractSpectrum,
    ProductSpec,
    admissible_t,
    buser_surrogate_spectrum,
    check_precompactness,
    product_conformal_spectrum,
    product_scalar_curvature,
    sphere_spectrum,
    yamabe_rescale,
)

__all__ = [
    "__version__",
    "Grid",
    "ScalarField",
    "CovectorField",
    "SymTensorField",
    "MetricField",
    "ChristoffelField",
    "OperatorPair",
    "SpectralDecomposition",
    "coupling_constant",
    "assemble",
    "eig_lowest",
    "kernel",
    "count_below",
    "conformal_covariance_check",
    "MetricCurve",
    "QMatrix",
    "dot_scalar_curvature",
    "dot_laplacian",
    "q_operator",
    "eigenvalue_derivatives",
    "kernel_breaking_tensor",
    "derivative_identity_check",
    "nodal_diagnostics",
    "track_branch",
    "find_kernel_metric",
    "break_kernel",
    "AbstractSpectrum",
    "ProductSpec",
    "sphere_spectrum",
    "buser_surrogate_spectrum",
    "product_scalar_curvature",
    "product_conformal_spectrum",
    "admissible_t",
    "yamabe_rescale",
    "check_precompactness",
]
