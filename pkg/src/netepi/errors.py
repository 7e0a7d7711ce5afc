"""Exception types raised across the package."""


class NetepiError(Exception):
    """Base class for all package errors."""


class ParseError(NetepiError, ValueError):
    """Malformed input file (Matrix Market, coordinates or scenario)."""


class AsymmetryError(ParseError):
    """A general-form matrix whose pattern or values are not symmetric."""


class SelfLoopError(ParseError):
    """A diagonal nonzero in an adjacency file."""


class GraphError(NetepiError, ValueError):
    """A graph that violates the weighted-graph invariants."""


class DimensionMismatch(NetepiError, ValueError):
    pass


class ParameterError(NetepiError, ValueError):
    """Model parameter outside its admissible range."""


class NotConnected(NetepiError):
    """The graph has more than one connected component."""


class ConvergenceFailure(NetepiError):
    """An iterative method exhausted its iteration budget."""


class NoBracket(NetepiError):
    """The endemic root search found no sign change although R0 > 1."""


class UnstableStep(NetepiError):
    """The integrator produced a non-finite or clearly negative state."""


class NonpositiveState(NetepiError, ValueError):
    """A logarithmic Lyapunov monitor was evaluated on a non-positive entry."""
