"""Exception types shared across the package."""


class EpwindError(Exception):
    """Base class for all library errors."""


class InvalidInputError(EpwindError, ValueError):
    pass


class ConvergenceError(EpwindError):
    """An iterative solver stopped before reaching its tolerance.

    ``best`` holds the last iterate so callers can inspect or reuse it.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ParseError(EpwindError):
    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = tuple(sorted(expected))
        detail = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{message} at byte {offset}{detail}")


class EvaluationError(EpwindError):
    pass


class RefinementError(EpwindError):
    """Path sampling could not resolve the spectrum on some interval."""

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class AmbiguityError(EpwindError):
    pass


class ProbeError(EpwindError):
    pass


class ClassificationError(EpwindError):
    pass


class AtlasInconsistencyError(EpwindError):
    pass


class RayConstructionError(EpwindError):
    pass


class BasepointMismatchError(EpwindError):
    pass


class IntegrationError(EpwindError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class TieError(EpwindError):
    pass
