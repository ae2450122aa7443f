"""Exception types shared across the package."""


class SlicelabError(Exception):
    """Base class for all errors raised by slicelab."""


class InvalidScaleError(SlicelabError, ValueError):
    """A scale is not dyadic, or is finer/coarser than an operation allows."""


class InvalidParameterError(SlicelabError, ValueError):
    """A numeric parameter lies outside its admissible range."""


class InvalidInputError(SlicelabError, ValueError):
    """Inputs are inconsistent with each other (for example, mixed scales)."""


class UndefinedError(SlicelabError, ValueError):
    """The requested quantity is undefined for the given input (for example, empty families)."""


class PreconditionError(SlicelabError, ValueError):
    """A documented precondition fails; ``details`` carries the measured values."""

    def __init__(self, message: str, details: dict | None = None):
        super().__init__(message)
        self.details = dict(details or {})
