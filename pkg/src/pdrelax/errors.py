"""Exception hierarchy shared by the library and the command line."""


class PdRelaxError(Exception):
    """Base class for all library errors."""

    exit_code = 3


class ConfigurationError(PdRelaxError, ValueError):
    """Malformed input: wrong shapes, unknown keys, invalid parameters."""

    exit_code = 2


class DomainError(PdRelaxError, ValueError):
    """Argument outside the domain of a map (e.g. non-positive density)."""

    exit_code = 2


class PreconditionError(PdRelaxError):
    """A structural precondition of an operation does not hold."""

    exit_code = 1


class ValidationFailure(PdRelaxError):
    """A checked property (SK, certificate, acceptance gate) is false."""

    exit_code = 1


class NumericFailure(PdRelaxError):
    """Non-finite values, failed residual checks, positivity loss.

    ``dump`` carries arrays useful for post-mortem inspection and
    ``trajectory`` the partial result of an aborted time integration.
    """

    exit_code = 3

    def __init__(self, message, dump=None, trajectory=None):
        super().__init__(message)
        self.dump = dump or {}
        self.trajectory = trajectory


class CFLViolation(NumericFailure):
    """Time step too large for the advective CFL bound."""

    def __init__(self, message, suggested_dt, dump=None, trajectory=None):
        super().__init__(message, dump=dump, trajectory=trajectory)
        self.suggested_dt = suggested_dt
