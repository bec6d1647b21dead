"""Exception types shared across the pipeline."""


class ProtosegError(Exception):
    """Base class for all pipeline errors."""


class FormatError(ProtosegError):
    """A serialized file does not conform to its binary format."""


class DegenerateVectorError(ProtosegError):
    """A vector that must have nonzero norm is (numerically) zero."""


class DegenerateMaskError(ProtosegError):
    """A mask has an empty foreground or background where both are required."""


class ConvergenceError(ProtosegError):
    """An iterative solver failed to converge within its iteration cap."""


class EmptyLibraryError(ProtosegError):
    """Library construction kept zero images."""


class ShapeError(ProtosegError):
    """Mismatched array dimensions."""
