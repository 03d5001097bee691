"""Exception hierarchy shared by the solvers, simulator and CLI."""


class QExploreError(Exception):
    """Base class for all package errors."""


class NumericalError(QExploreError):
    """A quadrature, root-finder or closed-form evaluation produced garbage."""


class InvalidDistribution(QExploreError, ValueError):
    pass


class InvalidGrid(QExploreError, ValueError):
    pass


class DegenerateParameters(QExploreError, ValueError):
    pass


class ConvexityViolation(QExploreError):
    """The per-step action penalty ``K_n - h2_{n+1} gamma_n^2 dt`` is not positive.

    Attributes
    ----------
    n : int or None
        Offending grid index, when known.
    """

    def __init__(self, message, n=None):
        super().__init__(message)
        self.n = n


class NonConvergence(QExploreError):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class ConfigError(QExploreError, ValueError):
    """Config schema violation; ``field`` holds the dotted path of the bad key."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
