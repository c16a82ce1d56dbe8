"""Error types.  Validation errors map to CLI exit code 1, numerical ones to 2."""


class AsymfsrError(Exception):
    """Base class for all package errors."""


class ValidationError(AsymfsrError, ValueError):
    """Invalid input data or configuration."""


class NumericalError(AsymfsrError):
    """A computation could not be completed reliably."""


class SectorGeometryError(NumericalError):
    """Hand-built sector for which the shift lemma does not apply."""


class ExponentBoundError(NumericalError):
    """An exponential would exceed the growth allowed inside the sector domain."""


class OutsideDomainError(NumericalError):
    """Spectral parameter outside the extended sector."""


class NoContractionError(NumericalError):
    """Successive approximations do not contract at this spectral parameter."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class ConvergenceError(NumericalError):
    """An iteration reached its limit without meeting its tolerance."""


class OracleUnavailable(NumericalError):
    """A reference solution cannot be formed for this input (not a failure of the solver)."""
