"""Exception types shared across the package."""


class DomainError(ValueError):
    """Raised when a metric or pipeline stage is undefined for the input.

    Examples: fitness of a zero tensor, smoothness or compression of a
    constant tensor (zero standard deviation).
    """


class DivergedError(RuntimeError):
    """Raised when training produces a non-finite loss."""


class FormatError(ValueError):
    """Raised on malformed serialized data. Carries the byte offset."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset
