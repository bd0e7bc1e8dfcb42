"""Exception hierarchy.

Each class carries the CLI exit code it maps to.
"""


class DdynError(Exception):
    exit_code = 4


class ModelError(DdynError, ValueError):
    """Invalid model, parameter, or argument."""

    exit_code = 2

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SingularError(DdynError, ArithmeticError):
    """Singular topology, pose, or inertia matrix."""

    exit_code = 3


class NumericError(DdynError, ArithmeticError):
    """Integration or solver failure."""

    exit_code = 4


class ForwardLockedError(ModelError):
    """Forward efficiency is non-positive: the drive cannot deliver power."""
