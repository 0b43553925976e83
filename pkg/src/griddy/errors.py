"""Exception types shared across the package."""


class GriddyError(Exception):
    """Base class for all package-specific errors."""


class DomainError(GriddyError):
    """A point, grid, or box violates the domain geometry."""


class GridMismatchError(GriddyError):
    """A 1D grid does not span the axis interval it is attached to."""


class DegenerateConditionalError(GriddyError):
    """A conditional slice cannot be normalized (zero mass, no clamp floor)."""


class UnsupportedTargetError(GriddyError):
    """The requested operation needs target features that are absent."""


class EvaluationError(GriddyError):
    """A target or model produced a non-finite value."""


class TailBoundError(GriddyError):
    """Truncation tail-bound hypothesis violated or constants unavailable."""


class ReducibilityError(GriddyError):
    """Power iteration failed to settle on a unique fixed vector."""


class StateSpaceError(GriddyError):
    """A discretization request exceeds the supported state-space size."""


class ZeroVarianceError(GriddyError):
    """Autocorrelation requested for a constant chain."""
