"""Exception hierarchy for minflex."""


class MinflexError(Exception):
    """Base class for all errors raised by minflex."""


class EmptyBody(MinflexError):
    pass


class NonPolyhedral(MinflexError):
    pass


class PointInsideBody(MinflexError):
    pass


class DimMismatch(MinflexError, ValueError):
    pass


class DegeneratePlane(MinflexError, ValueError):
    pass


class InvalidParams(MinflexError, ValueError):
    pass


class OddDimension(MinflexError, ValueError):
    pass


class NonFiniteHessian(MinflexError):
    pass


class EmptyZeroSet(MinflexError):
    pass


class NotTouching(MinflexError):
    """Raised when the map does not touch the zero set at the center,
    or touches it along a whole neighbourhood (degenerate contact)."""


class InsideBody(MinflexError):
    pass


class GridTooCoarse(MinflexError):
    pass


class LoopExitsGrid(MinflexError):
    pass


class NullQuadricViolation(MinflexError):
    pass


class PeriodObstruction(MinflexError):
    pass


class PathDisagreement(MinflexError):
    pass


class UnknownSurface(MinflexError, KeyError):
    pass


class ZeroVector(MinflexError, ValueError):
    pass


class NoPathFound(MinflexError):
    pass


class EndpointOutsideDomain(MinflexError):
    pass


class ParseError(MinflexError, ValueError):
    pass
