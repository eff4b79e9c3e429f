"""Exception and warning classes shared across the toolkit."""


class ConfspecError(Exception):
    """Base class for all toolkit errors."""


class GridMismatch(ConfspecError):
    """Fields passed to one operation live on different grids."""


class SingularMetric(ConfspecError):
    """Metric failed the pointwise positive-definiteness check."""


class NonPositiveConformalFactor(ConfspecError):
    """Conformal factor must be strictly positive everywhere."""


class DimensionTooSmall(ConfspecError):
    """The coupling constant (n-2)/(4(n-1)) is only defined for n >= 3."""


class ConvergenceFailure(ConfspecError):
    """Eigenvalue iteration did not converge.

    Carries the achieved residual and iteration count when available.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class EmptyKernel(ConfspecError):
    """No eigenvalue inside the kernel tolerance window."""


class DisallowedCoupling(ConfspecError):
    """Coupling constants c = 0 and c = 1/2 are excluded: the first-order
    kernel-breaking argument is degenerate there."""


class NotTraceless(ConfspecError):
    """Perturbation direction must be traceless for this identity."""


class ConstantField(ConfspecError):
    """Nodal diagnostics need a sign-structure; a constant field has none."""


class SPDViolation(ConfspecError):
    """A metric along the requested curve segment is not positive definite."""


class NoSignChange(ConfspecError):
    """The tracked eigenvalue branch never changes sign on the t-grid."""


class FirstOrderDegenerate(ConfspecError):
    """Every kernel eigenfunction yields a vanishing breaking tensor, so no
    first-order direction moves the zero eigenvalue (scalar-flat-type
    obstruction)."""


class LineSearchFailure(ConfspecError):
    """Kernel multiplicity never dropped within the allowed step range.

    The compressed derivative matrix is attached for diagnosis.
    """

    def __init__(self, message, q_matrix=None):
        super().__init__(message)
        self.q_matrix = q_matrix


class TruncationInadequate(ConfspecError):
    """Component spectra are not truncated high enough to certify the
    negative count of the product spectrum."""


class EmptyAdmissibleSet(ConfspecError):
    """No t in the search range makes all designated fiber modes negative."""


class NonNegativeScalarCurvature(ConfspecError):
    """Normalizing scalar curvature to -1 requires it negative to start."""


class InvalidParameters(ConfspecError):
    """Parameters outside the documented range."""


class ConfigError(ConfspecError):
    """Experiment configuration is malformed or out of range."""


class TruncationWarning(UserWarning):
    """The computed spectral window did not bracket the requested threshold;
    the returned count is a lower bound."""


class BranchAmbiguity(UserWarning):
    """Best eigenvector overlap during branch matching fell below 0.5; the
    assignment at that step is reported, not trusted."""


class ExcludedCouplingWarning(UserWarning):
    """Operator assembled with c in {0, 1/2}; fine for spectra, but the
    kernel-breaking machinery rejects these values."""
