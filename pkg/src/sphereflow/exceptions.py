"""Exception types raised across the package."""


class SphereflowError(Exception):
    """Base class for package errors."""


class OrderingError(SphereflowError, ValueError):
    """An operation needs a different pixel ordering (e.g. NESTED for pooling)."""


class ShapeError(SphereflowError, ValueError):
    """Array shapes or channel counts are inconsistent."""


class CapacityError(SphereflowError, ValueError):
    """Problem too large for the dense desk-scale code path."""


class NumericalRankError(SphereflowError, ValueError):
    """A least-squares system is numerically rank deficient."""


class TrainingError(SphereflowError, RuntimeError):
    """Training diverged (non-finite loss)."""
