"""Exception hierarchy shared by every module of the toolkit."""


class PtmooError(Exception):
    """Base class for all errors raised by :mod:`ptmoo`."""


class ConfigurationError(PtmooError, ValueError):
    """Invalid user-supplied configuration (bounds, counts, options)."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DimensionError(PtmooError, ValueError):
    """Array shapes do not agree."""


class DegenerateInputError(PtmooError, ValueError):
    """Input carries no information to work with (zero energy, zero variance)."""


class DuplicateInputError(PtmooError, ValueError):
    """Training inputs contain repeated rows."""


class IllConditionedError(PtmooError, ArithmeticError):
    """Covariance factorization failed even at the largest jitter."""

    def __init__(self, message, jitter=None):
        self.jitter = jitter
        if jitter is not None:
            message = f"{message} (jitter={jitter:g})"
        super().__init__(message)


class UnsupportedDimensionError(PtmooError, ValueError):
    """Operation only defined for a fixed number of objectives."""


class EvaluationError(PtmooError, RuntimeError):
    """An evaluator raised while processing a specific design."""

    def __init__(self, message, design=None):
        self.design = design
        super().__init__(message)
