"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class TVFlowError(Exception):
    """Base class for all errors raised by tvflow4."""


class DomainError(TVFlowError, ValueError):
    """Input outside the mathematical domain (bad radius, dimension, datum)."""


class SingularityError(DomainError):
    """Evaluation at a point where the profile is singular."""


class RangeError(DomainError):
    """Parameters outside the range where the numerics are trusted."""


class UnsupportedDomainError(DomainError):
    """Generalized annulus kinds that are not treated (the whole space)."""


class NotCalibrableError(TVFlowError):
    """A region required by the facet system admits no calibration."""


class IntegrationError(TVFlowError):
    """Non-finite values or runaway event counts during time stepping."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class BendingError(IntegrationError):
    """The n = 2 bending-region bookkeeping left the ansatz it implements."""
