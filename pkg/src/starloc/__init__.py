"""Simultaneous indoor and outdoor 3D localization with a STAR-RIS."""

from .errors import (
    ConfigError,
    DegenerateGeometryError,
    InsufficientOverheadError,
    InvalidFrequencyError,
    StarLocError,
    UnidentifiableError,
)
from .geometry import LinkGeometry
from .scenario import Scenario
from .star_ris import PhaseSchedule, PowerConfig

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DegenerateGeometryError",
    "InsufficientOverheadError",
    "InvalidFrequencyError",
    "LinkGeometry",
    "PhaseSchedule",
    "PowerConfig",
    "Scenario",
    "StarLocError",
    "UnidentifiableError",
]
