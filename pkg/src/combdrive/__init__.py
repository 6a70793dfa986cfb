"""Symmetric periodic orbits of the comb-drive finger actuator and their linear stability."""

from .errors import (
    AdmissibilityError,
    CombDriveError,
    ConvergenceError,
    DomainError,
    IntegrationError,
    PeriodicityError,
    RangeError,
)
from .model import DriveSpec, ModelParams

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError",
    "CombDriveError",
    "ConvergenceError",
    "DomainError",
    "IntegrationError",
    "PeriodicityError",
    "RangeError",
    "DriveSpec",
    "ModelParams",
    "__version__",
]
