"""Exception hierarchy shared by all modules."""


class QGraphError(Exception):
    """Base class for every error raised by the package."""


class GraphInputError(QGraphError, ValueError):
    """Malformed graph or graph file. ``field`` names the offending entry."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class NumericalError(QGraphError, ArithmeticError):
    """A computation could not reach its stated tolerance."""


class PoleError(NumericalError):
    """Edge DtN coefficient evaluated at a Dirichlet eigenvalue of the edge."""

    def __init__(self, message: str, edge_id: int | None = None):
        super().__init__(message)
        self.edge_id = edge_id


class SingularInteriorError(NumericalError):
    """Interior block of a DtN matrix is singular."""


class BudgetExceededError(QGraphError):
    """An enumeration would exceed its configured size guard."""


class NonGenericError(QGraphError):
    """Eigenfunction is degenerate or vanishes at a vertex."""


class ContinuationError(NumericalError):
    """A followed eigenvalue branch jumped to a neighbouring level."""


class ResidualError(NumericalError):
    """Reported eigenvalue does not annihilate I - U to tolerance."""


class IncompleteSpectrumError(QGraphError):
    """Spectra do not cover enough states for the requested comparison."""


class InsufficientDataError(QGraphError):
    """Too few samples for a statistic."""


class KDependentError(QGraphError):
    """Operation needs a k-independent scattering matrix."""
