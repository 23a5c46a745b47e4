"""Exception hierarchy shared across the package."""


class QuenchLabError(Exception):
    """Base class for all package errors."""


class ValidationError(QuenchLabError):
    """Configuration or input failed schema/precondition validation."""


class LayoutMismatch(QuenchLabError):
    """Operands live on phase spaces of different dimension."""


class EmptyRegion(QuenchLabError):
    """A pixel subset used for restriction is empty."""


class UnphysicalState(QuenchLabError):
    """A symplectic eigenvalue fell below the vacuum floor beyond tolerance."""

    def __init__(self, min_lambda: float, tol: float = 1e-8):
        self.min_lambda = float(min_lambda)
        self.tol = float(tol)
        super().__init__(
            f"covariance matrix is unphysical: min symplectic eigenvalue "
            f"{self.min_lambda:.6g} < 1/2 - {self.tol:g}"
        )


class NonConvergence(QuenchLabError):
    """A dense eigen/decomposition step failed or lost required accuracy."""


class ZeroModeAtFiniteMass(QuenchLabError):
    """Thermal-state construction hit a zero-frequency normal mode."""


class BelowZeroPoint(QuenchLabError):
    """Requested Gibbs energy is at or below the zero-point energy."""


class InvalidPartition(QuenchLabError):
    """System/environment split is outside the allowed pixel range."""


class FactorizationFailure(QuenchLabError):
    """A noise covariance was indefinite beyond the clipping tolerance."""


class UnderdeterminedFit(QuenchLabError):
    """Least-squares design has fewer independent equations than unknowns."""


class DegenerateFit(QuenchLabError):
    """Fit input is degenerate (e.g. non-positive variances)."""


class TooManyFailedResamples(QuenchLabError):
    """More than the tolerated fraction of bootstrap resamples failed."""
