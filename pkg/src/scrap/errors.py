"""Exception types shared across the package."""


class ScrapError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(ScrapError, ValueError):
    """Invalid configuration, arguments or shapes."""


class NumericalFailure(ScrapError, ArithmeticError):
    """An iterative kernel failed to converge.

    ``iterations`` is the number of iterations (or sweeps) performed before
    giving up, ``None`` when the failing backend does not report it.
    """

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class SingularGramError(NumericalFailure):
    """Gram matrix of a clutter subspace is not positive definite."""


class FormatError(ScrapError):
    """Malformed or truncated on-disk container."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class UndefinedScnrError(ScrapError):
    """SCNR requested with an empty clutter region."""
