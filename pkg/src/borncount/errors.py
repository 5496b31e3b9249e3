"""Exception types raised by borncount."""


class BornCountError(ValueError):
    """Base class for precondition and numerical-guard failures."""


class GridMismatchError(BornCountError):
    """Two objects that must share a grid do not."""


class NormalizationError(BornCountError):
    """A ket that must be unit-normalized is not."""


class UnknownLabelError(BornCountError, KeyError):
    """A macrostate label is not part of the partition."""

    def __str__(self):
        return ValueError.__str__(self)


class MonotonicityError(BornCountError):
    """A reparametrization is not strictly monotone on the grid."""


class DepthGuardError(BornCountError):
    """The requested refinement depth exceeds what the grid resolves."""


class EmptySupportError(BornCountError):
    """A state has no mass where some is required."""
