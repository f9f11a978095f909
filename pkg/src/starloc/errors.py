"""Exception hierarchy for starloc."""


class StarLocError(Exception):
    """Base class for all package errors."""


class DegenerateGeometryError(StarLocError, ValueError):
    """Coincident nodes, zero distances, or elevation at +/- pi/2."""


class InsufficientOverheadError(StarLocError, ValueError):
    """Too few pilot slots for the requested schedule or nulling step."""


class UnidentifiableError(StarLocError, ValueError):
    """A Fisher information matrix is numerically singular.

    Attributes
    ----------
    direction : ndarray
        Unit eigenvector of the smallest eigenvalue (the near-null direction).
    condition : float
        Condition number that triggered the error.
    """

    def __init__(self, message, direction=None, condition=float("inf")):
        super().__init__(message)
        self.direction = direction
        self.condition = condition


class InvalidFrequencyError(StarLocError, ValueError):
    """A recovered spatial frequency does not map back to a physical angle."""


class ConfigError(StarLocError, ValueError):
    """Malformed or inconsistent experiment configuration."""
