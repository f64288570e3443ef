"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: validation problems exit 2, numerical
failures exit 3, file problems exit 4.
"""


class ShiftLabError(Exception):
    """Base class for all library errors."""


class ValidationError(ShiftLabError, ValueError):
    """Bad argument or configuration value."""


class InvalidDimensionError(ValidationError):
    pass


class NumericalError(ShiftLabError, ArithmeticError):
    """A computation could not produce a finite, well-defined answer."""


class DegenerateProjectionError(NumericalError):
    pass


class GenerationError(NumericalError):
    pass


class SingularDesignError(NumericalError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class DivergenceError(NumericalError):
    pass


class ParseError(ShiftLabError, OSError):
    """Malformed data file; message names the file and line."""

    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line
