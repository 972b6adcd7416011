"""Exception types shared across the package."""


class RankFeatError(Exception):
    """Base class for all package errors."""


class InvalidInputError(RankFeatError, ValueError):
    """Input violates a shape, range or finiteness precondition."""


class DegenerateInputError(RankFeatError, ValueError):
    """Input is valid but degenerate, e.g. an all-zero matrix."""


class ConvergenceError(RankFeatError, RuntimeError):
    """An iterative kernel exhausted its iteration budget."""


class NpyFormatError(RankFeatError):
    """Malformed NPY file. ``offset`` is the byte position of the problem."""

    def __init__(self, message, offset=None):
        self.message = message
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset
