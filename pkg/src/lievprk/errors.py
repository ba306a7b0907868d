"""Exception types raised by the integrators and diagnostics."""


class LieVPRKError(Exception):
    """Base class for all package errors."""


class OutOfDomain(LieVPRKError, ValueError):
    """Argument lies outside the neighbourhood where a retraction is a diffeomorphism.

    From a stepper this usually means the step size is too large for the
    chosen retraction.
    """


class UnsupportedGroup(LieVPRKError, ValueError):
    """Operation is not defined for the requested group."""


class Singular(LieVPRKError, ArithmeticError):
    """A coordinate matrix that must be inverted is singular."""


class NoConvergence(LieVPRKError, RuntimeError):
    """Newton iteration hit its iteration limit.

    The partially converged iterate and the last report are attached so
    callers can log them.
    """

    def __init__(self, message, x=None, report=None):
        super().__init__(message)
        self.x = x
        self.report = report


class ReferenceUnconverged(LieVPRKError, RuntimeError):
    """Two resolutions of a reference solution disagree above tolerance."""
