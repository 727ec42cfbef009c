"""Exception types shared across the package."""


class CvqkdError(Exception):
    """Base class for all package-specific errors."""


class ModelError(CvqkdError, ValueError):
    """Physical model parameters out of range (T, eta, noise, ...)."""


class NumericDomainError(CvqkdError, ArithmeticError):
    """A closed-form expression left its valid numeric domain."""


class CalibrationError(CvqkdError):
    """Shot-noise calibration rejected the supplied samples."""


class EstimationError(CvqkdError):
    """Channel-parameter estimation produced an unusable result."""


class CodeConstructionError(CvqkdError):
    """LDPC code construction could not satisfy its invariants."""


class DecodeFailure(CvqkdError):
    """Reconciliation failure that was *detected* (block must be discarded)."""


class NoKeyAvailable(CvqkdError):
    """Privacy amplification cannot produce a key (k <= 0)."""


class ProtocolError(CvqkdError):
    """Malformed or unexpected classical-channel traffic."""


class AuthenticationError(ProtocolError):
    """Message authentication tag did not verify."""
