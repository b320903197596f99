"""Exception types raised across the package."""


class SoftTPError(Exception):
    """Base class for all package errors."""


class ParseError(SoftTPError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(SoftTPError, ValueError):
    pass


class TargetOutOfRange(SoftTPError, ValueError):
    pass


class KindMismatch(SoftTPError, ValueError):
    pass


class ShapeMismatch(SoftTPError, ValueError):
    pass


class MissingLabel(SoftTPError, ValueError):
    pass


class IncompleteBoard(SoftTPError, ValueError):
    pass


class UnsupportedProgram(SoftTPError, ValueError):
    pass


class SizeLimit(SoftTPError, ValueError):
    pass


class NonFinite(SoftTPError, ArithmeticError):
    pass
