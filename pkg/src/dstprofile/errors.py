"""Exception types shared across the package."""


class DstError(Exception):
    """Base class for all package errors."""


class DomainError(DstError, ValueError):
    """Argument lies outside the domain where the quantity is defined."""


class PrecisionExhausted(DstError, ArithmeticError):
    """Adaptive evaluation did not stabilise within the doubling cap."""


class CapExceeded(DstError):
    """Requested size exceeds a documented resource cap."""


class BitExhausted(DstError):
    """A finite bit source ran out before the tree could be built."""


class NoConvergence(DstError, ArithmeticError):
    """An iterative solver failed to converge."""


class DegenerateVariance(DstError):
    """Variance is exactly zero so standardisation is undefined."""


class OutsideCentralRange(UserWarning):
    """Level lies outside the range where the normal limit is expected."""
