"""Exception hierarchy shared by every stage of the pipeline."""


class FdbreakError(Exception):
    """Base class. ``stage`` is filled in by the pipeline when it re-raises."""

    stage: str | None = None


class ValidationError(FdbreakError, ValueError):
    """Bad user input or violated precondition."""


class DomainError(ValidationError):
    """Evaluation point outside [0, 1]."""


class IngestionError(ValidationError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class NumericalError(FdbreakError, ArithmeticError):
    """The data do not support the requested computation."""


class SingularDesignError(NumericalError):
    pass


class DegenerateVarianceError(NumericalError):
    pass
