"""Exception types shared across the package."""


class TripleDeckError(Exception):
    """Base class for all package errors."""


class SectorError(TripleDeckError, ValueError):
    """Airy argument lies outside the decay sector."""


class PrecisionError(TripleDeckError, ArithmeticError):
    """A series evaluation lost too much precision."""


class RefineRequest(TripleDeckError):
    """A quadrature tail bound exceeds the requested tolerance."""


class GridMismatch(TripleDeckError, ValueError):
    """Array shapes do not match the grid they are attached to."""


class PreconditionError(TripleDeckError, ValueError):
    """An operation was called on data that violates its precondition."""


class ConditionError(TripleDeckError, ArithmeticError):
    """A linear solve was singular or badly conditioned.

    Attributes
    ----------
    xi : float or None
        Fourier frequency of the failing mode, if applicable.
    """

    def __init__(self, message, xi=None):
        super().__init__(message)
        self.xi = xi


class SmallnessViolated(TripleDeckError):
    """An inner fixed-point map failed to contract."""


class InconsistentState(TripleDeckError):
    """A state violates the displacement consistency relation."""


class InvariantError(TripleDeckError):
    """A structural invariant (monotone map, bounded denominator) broke."""


class StageError(TripleDeckError):
    """Wraps an error raised inside one stage of the rigidity iteration.

    Attributes
    ----------
    stage : str
        Name of the stage that failed.
    """

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
