"""Exception types raised across the package."""


class KLReplayError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(KLReplayError, ValueError):
    pass


class NonConvergence(KLReplayError, ArithmeticError):
    def __init__(self, message, iterations=None, last_step=None):
        super().__init__(message)
        self.iterations = iterations
        self.last_step = last_step


class UnstableOperator(KLReplayError, ValueError):
    pass


class NotPSD(KLReplayError, ValueError):
    pass


class Singular(KLReplayError, ArithmeticError):
    pass


class InsufficientSamples(KLReplayError, ValueError):
    pass


class EmptyBuffer(KLReplayError, RuntimeError):
    pass


class UsageError(KLReplayError, RuntimeError):
    """A stateful object was driven out of order."""


class ParseError(KLReplayError, ValueError):
    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.field = field


class ValidationError(KLReplayError, ValueError):
    pass


class UnknownPreset(KLReplayError, KeyError):
    pass


class UnstableClosedLoopWarning(UserWarning):
    """A designed feedback gain leaves A + BM with spectral radius >= 1."""
