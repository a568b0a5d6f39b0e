"""Exception and warning types shared across the package."""


class OmgsimError(Exception):
    """Base class for all package-specific errors."""


class DomainError(OmgsimError, ValueError):
    """A parameter is outside its physically meaningful range."""


class DimensionMismatch(OmgsimError, ValueError):
    """Operands live on incompatible Hilbert spaces."""


class TruncationError(OmgsimError):
    """Too much population would fall beyond the Fock-space cutoff."""


class NonHermitianError(OmgsimError, ValueError):
    """A generator that must be Hermitian is not."""


class FitError(OmgsimError, RuntimeError):
    """A least-squares fit failed or produced an unusable result."""


class IncompleteDataError(OmgsimError, ValueError):
    """Tomography data does not span the full operator space."""


class EmptyDataError(OmgsimError, ValueError):
    """An estimator received no events to work with."""


class EmptyCategoryError(OmgsimError, ValueError):
    """A budget total was requested for a category with no entries."""


class MissingExposureError(OmgsimError, KeyError):
    """A mechanism model was evaluated without a required exposure field."""


class ValidationError(OmgsimError, ValueError):
    """A configuration document failed schema or range validation."""


class TruncationWarning(UserWarning):
    """Dynamical population reached the top simulated Fock level."""


class ConvergenceWarning(UserWarning):
    """An iterative solver stopped at its iteration cap."""


class ClampWarning(UserWarning):
    """A negative value produced by round-off or inversion was clamped."""
