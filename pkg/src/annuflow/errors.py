"""Exception hierarchy shared by all annuflow modules."""


class AnnuflowError(Exception):
    """Base class for all errors raised by annuflow."""


class ParameterError(AnnuflowError, ValueError):
    """A physical or numerical parameter is outside its admissible domain."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class DomainError(AnnuflowError, ValueError):
    """A coordinate lies outside the mapped domain [-1, 1]."""


class ConfigurationError(AnnuflowError, ValueError):
    """Grid resolution or layout cannot be built."""


class AssemblyError(AnnuflowError, ValueError):
    """Field arrays do not match the collocation layout."""


class SingularMatrixError(AnnuflowError, ArithmeticError):
    """A dense system is numerically singular."""

    def __init__(self, message, condition=None):
        self.condition = condition
        if condition is not None:
            message = f"{message} (condition estimate {condition:.3e})"
        super().__init__(message)


class EigenSolverError(AnnuflowError, ArithmeticError):
    """The generalized eigenvalue decomposition failed."""


class NewtonDivergenceError(AnnuflowError, ArithmeticError):
    """Newton iteration did not converge within the iteration cap."""

    def __init__(self, message, last_correction=None, dT=None):
        self.last_correction = last_correction
        self.dT = dT
        if dT is not None:
            message = f"{message} at dT={dT:g}"
        super().__init__(message)


class BracketError(AnnuflowError, ValueError):
    """The threshold search interval does not bracket a sign change."""

    def __init__(self, message, f_lo=None, f_hi=None):
        self.f_lo = f_lo
        self.f_hi = f_hi
        super().__init__(message)
