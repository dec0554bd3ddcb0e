"""Exception types shared across the package."""


class NMKError(ValueError):
    """Base class for argument and domain failures."""


class DomainError(NMKError):
    """A parameter lies outside the domain where the quantity is defined."""


class CutError(DomainError):
    """The point lies on (or numerically on) the segment [-F, F]."""


class ValidityError(DomainError):
    """An asymptotic formula was requested outside its region of validity."""


class InvalidArgument(NMKError):
    """Non-finite or malformed input."""


class ConvergenceError(RuntimeError):
    """An iterative or refinement scheme failed to stabilise."""


class KernelOverflowError(OverflowError):
    """A de-scaled result does not fit in a native float."""
