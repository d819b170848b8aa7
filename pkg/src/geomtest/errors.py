"""Exception taxonomy shared across the package."""


class GeomtestError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(GeomtestError, ValueError):
    """A caller-supplied parameter is out of its documented range."""


class InvalidInputError(GeomtestError, ValueError):
    """Input data violates a precondition (non-finite values, size mismatch, ...)."""


class ResourceLimitError(GeomtestError):
    """A request would exceed a hard resource guard (e.g. expected point count)."""


class NumericalError(GeomtestError):
    """A numerical operation failed (singular matrix, zero density, ...)."""


class IncompleteConstantsError(GeomtestError):
    """A variance formula was asked to run without a constant it needs."""

    def __init__(self, symbol: str, kind: str):
        self.symbol = symbol
        self.kind = kind
        super().__init__(f"missing constant {symbol!r} for graph kind {kind!r}")


class InsufficientPilotError(GeomtestError):
    """The pilot run used for unconditional centering is too noisy."""


class GridTooCoarseError(GeomtestError):
    """Every tail estimate on the requested grid was zero."""
