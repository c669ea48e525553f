"""Surface diffusion of a lens-shaped curve with contact-angle ends, written as a height field over a circular arc."""

from .discretization import Grid
from .errors import (
    ChartOutOfRangeError,
    ConfigError,
    DegenerateParametrizationError,
    DomainError,
    LensflowError,
    NumericalError,
    SingularCouplingError,
    StepError,
)
from .geometry import CutoffProfile, LensParams

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "LensParams",
    "CutoffProfile",
    "LensflowError",
    "ConfigError",
    "DomainError",
    "DegenerateParametrizationError",
    "SingularCouplingError",
    "ChartOutOfRangeError",
    "StepError",
    "NumericalError",
]
