"""Exception hierarchy shared by every gifkit module."""


class GifError(ValueError):
    """Base class for all gifkit errors."""


class ModeError(GifError):
    """Operation is not defined for the grid mode of its input."""


class PreconditionError(GifError):
    """An operation's documented precondition does not hold."""


class NotIncompressibleError(PreconditionError):
    """Input measure fails the incompressibility check."""


class NotShiftInvariantError(PreconditionError):
    """Input measure is not invariant under the time shift."""


class InfeasibleError(GifError):
    """The minimum-action problem has no feasible path measure."""


class EnumerationCapError(GifError):
    """Path enumeration would exceed the configured cap."""
