"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration text."""


class GridError(ValueError):
    """Geometry or field construction/selection problem."""


class QuadratureError(RuntimeError):
    """A quadrature routine failed to converge to its tolerance."""


class SolverError(RuntimeError):
    """Time integration failed for a reason that is a bug, not physics."""


class NumericalInstability(SolverError):
    """NaN/Inf or a beyond-tolerance negative appeared below the blow-up threshold."""
