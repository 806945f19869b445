"""Localized defect modes in high-contrast periodic media.

Limit two-scale spectral problem (inclusion spectra, the beta function,
band gaps, perforated homogenized tensor, defect eigenmodes) and a
brute-force fine-scale validator for the epsilon -> 0 convergence rate.
"""

from hicontrast.errors import (
    AssemblyError,
    ConfigError,
    ConvergenceError,
    FactorizationError,
    GeometryError,
    HicontrastError,
    NumericalError,
    OutOfGapError,
    PoleProximityError,
)

__version__ = "0.1.0"

__all__ = [
    "AssemblyError",
    "ConfigError",
    "ConvergenceError",
    "FactorizationError",
    "GeometryError",
    "HicontrastError",
    "NumericalError",
    "OutOfGapError",
    "PoleProximityError",
]
