"""Exception and warning types shared across the package."""


class KBRError(Exception):
    """Base class for every error raised by this package."""


class InvalidInput(KBRError, ValueError):
    pass


class InvalidConfig(KBRError, ValueError):
    """A configuration value is out of range or an unknown key was given."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class NumericalUnderflow(KBRError):
    """All kernel values underflowed to zero for some center."""


class NotConverged(KBRError):
    """The Lagrange-multiplier iteration did not reach the moment tolerance."""

    def __init__(self, message, residual=None, index=None):
        super().__init__(message)
        self.residual = residual
        self.index = index


class DegenerateCorrection(KBRError):
    """Every training-point term of the second-order correction was excluded."""


class GradientDegenerate(KBRError):
    """The explicit-scheme gradient denominator is below tolerance."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class LaplacianDegenerate(KBRError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class IllConditioned(KBRError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class InsufficientData(KBRError):
    pass


class FitFailed(KBRError):
    pass


class SingularStencil(KBRError):
    pass


class SolverFailed(KBRError):
    pass


class NonPhysicalState(KBRError):
    pass


class Unstable(KBRError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class MetricUndefined(KBRError):
    pass


class SchemaError(KBRError):
    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class ExtrapolationWarning(UserWarning):
    """A query point lies outside the training hull by more than sqrt(theta)."""
