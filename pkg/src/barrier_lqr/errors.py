"""Exception hierarchy for the barrier-LQR solver."""


class BarrierLqrError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(BarrierLqrError, ValueError):
    """A parameter violates a documented precondition (sign, range, ordering)."""


class DomainError(BarrierLqrError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class ShapeError(BarrierLqrError, ValueError):
    """Array dimensions are inconsistent with the problem data."""


class IntegrationDivergedError(BarrierLqrError, ArithmeticError):
    """An integrator produced non-finite values; indicates a bug or invalid input."""


class ConfigError(BarrierLqrError, ValueError):
    """A scenario file failed to parse or validate.

    Carries enough context (section/key or line) to locate the offending entry.
    """

    def __init__(self, message: str, *, section: str | None = None, key: str | None = None):
        self.section = section
        self.key = key
        where = ""
        if section is not None and key is not None:
            where = f" [{section}.{key}]"
        elif section is not None:
            where = f" [{section}]"
        super().__init__(message + where)
