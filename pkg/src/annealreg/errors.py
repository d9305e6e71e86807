"""Exception types shared across the package."""


class AnnealRegError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(AnnealRegError):
    """Operands have incompatible shapes."""


class TooFewSamples(AnnealRegError):
    """Not enough samples for the requested statistic."""


class ZeroVariance(AnnealRegError):
    """A coordinate is constant where nonzero variance is required."""

    def __init__(self, coordinate: int, message: str | None = None):
        self.coordinate = coordinate
        super().__init__(message or f"coordinate {coordinate} has zero variance")


class Empty(AnnealRegError):
    """An operation received an empty collection."""


class TooLarge(AnnealRegError):
    """Problem exceeds the size cap of an exact method."""


class IndexOutOfRange(AnnealRegError):
    """A qubit or coupler index does not exist on the hardware graph."""


class TooManyLogicalQubits(AnnealRegError):
    """Requested clique exceeds the embedding capacity of the graph."""


class UnsupportedMask(AnnealRegError):
    """Inoperable qubits/couplers break the deterministic embedding."""


class EmbeddingMismatch(AnnealRegError):
    """Embedding does not cover the problem's variables or couplings."""


class BracketInvalid(AnnealRegError):
    """Bisection bounds do not bracket the target value."""


class ParseError(AnnealRegError):
    """A text input could not be parsed."""

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class TooFewPoints(AnnealRegError):
    """Not enough points for the requested fit."""
