"""Exception hierarchy.

Everything raised deliberately by the library derives from :class:`NHHError`.
:class:`PhysicsError` subclasses flag a model that left the regime where the
construction makes sense (complex spectrum, singular map, lost positivity);
the remaining ones are input-validation failures and also derive from
``ValueError``.
"""

from __future__ import annotations


class NHHError(Exception):
    """Base class for all library errors."""


class PhysicsError(NHHError):
    """The model or trajectory left the quasi-Hermitian regime."""


class ConfigError(NHHError, ValueError):
    """Malformed or inconsistent run configuration."""


class NonFinite(NHHError, ValueError):
    """Input contains NaN or Inf."""


class DimensionMismatch(NHHError, ValueError):
    pass


class BadWeights(NHHError, ValueError):
    pass


class BadParams(NHHError, ValueError):
    pass


class UnknownPreset(NHHError, ValueError):
    pass


class InsufficientPoints(NHHError, ValueError):
    pass


class NotHermitian(PhysicsError):
    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class NotPositiveDefinite(PhysicsError):
    def __init__(self, message: str, min_eig: float):
        super().__init__(message)
        self.min_eig = min_eig


class DefectiveMatrix(PhysicsError):
    pass


class ComplexSpectrum(PhysicsError):
    """Eigenvalues left the real axis; no positive metric exists."""

    def __init__(self, message: str, eigenvalues):
        super().__init__(message)
        self.eigenvalues = eigenvalues


class SingularMap(PhysicsError):
    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t


class HermitizationFailed(PhysicsError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class InconsistentTriple(PhysicsError):
    pass


class InitialObservabilityViolated(PhysicsError):
    pass


class InitialCouplingViolated(PhysicsError):
    pass


class PositivityLost(PhysicsError):
    def __init__(self, message: str, t: float, min_eig: float):
        super().__init__(message)
        self.t = t
        self.min_eig = min_eig


class StepRejected(PhysicsError):
    def __init__(self, message: str, t: float, error: float):
        super().__init__(message)
        self.t = t
        self.error = error
