"""Exception types raised across the package."""


class SliceLocError(Exception):
    """Base class for all package errors."""


class DegenerateGeometry(SliceLocError, ValueError):
    """Coincident points or parallel rays where a direction is required."""


class UndefinedMean(SliceLocError, ValueError):
    """Circular mean of angles whose resultant vector vanishes."""


class InvalidConfig(SliceLocError, ValueError):
    pass


class InsufficientSamples(SliceLocError, ValueError):
    pass


class DegenerateFit(SliceLocError, ValueError):
    pass


class InvalidArity(SliceLocError, ValueError):
    """Subset size outside ``3 <= k <= n``."""


class NoValidPairs(SliceLocError):
    """No pose pair produced a forward ray intersection."""


class OutOfRange(SliceLocError, ValueError):
    pass


class InvalidDepth(SliceLocError, ValueError):
    pass


class EmptyInput(SliceLocError, ValueError):
    pass


class FormatError(SliceLocError, ValueError):
    """Malformed input file."""
