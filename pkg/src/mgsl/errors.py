"""Exception hierarchy shared by the analysis and solver modules."""


class MGSLError(Exception):
    """Base class for all package errors."""


class NonPhysicalState(MGSLError):
    """Density or pressure is not positive."""


class EigendecompositionFailure(MGSLError):
    pass


class SingularDiagonal(MGSLError):
    """A 4x4 diagonal block (or its Fourier symbol) cannot be inverted."""


class SingularPreconditioner(MGSLError):
    pass


class SingularStageMatrix(MGSLError):
    pass


class UnknownScheme(MGSLError, KeyError):
    pass


class NonConvergence(MGSLError):
    pass


class DivergedState(MGSLError):
    """Raised when a nonlinear iteration produces NaN or nonphysical cells."""

    def __init__(self, message, cycle=None):
        super().__init__(message)
        self.cycle = cycle


class ConfigError(MGSLError, ValueError):
    pass
