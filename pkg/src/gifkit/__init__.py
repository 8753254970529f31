"""gifkit: finite path-measure tools for generalized incompressible flows."""
from gifkit.errors import (
    EnumerationCapError,
    GifError,
    InfeasibleError,
    ModeError,
    NotIncompressibleError,
    NotShiftInvariantError,
    PreconditionError,
)
from gifkit.path_measure import (
    Marginal,
    Observable,
    PathEvent,
    PathMeasure,
    StateSpace,
    TimeGrid,
    check_incompressible,
    condition,
    marginal_at,
    mix,
    shift,
)

__version__ = "0.1.0"

__all__ = [
    "EnumerationCapError",
    "GifError",
    "InfeasibleError",
    "Marginal",
    "ModeError",
    "NotIncompressibleError",
    "NotShiftInvariantError",
    "Observable",
    "PathEvent",
    "PathMeasure",
    "PreconditionError",
    "StateSpace",
    "TimeGrid",
    "check_incompressible",
    "condition",
    "marginal_at",
    "mix",
    "shift",
]
