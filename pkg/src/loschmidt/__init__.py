"""Loschmidt echo of the isotropic XY spin chain computed through unitary matrix integrals."""
from importlib.metadata import PackageNotFoundError, version

from .echo import ABC, PBC, ChainSpec, amplitude, log_amplitude
from .numerics import IMAGINARY_TIME, REAL_TIME, LogPolarAmplitude, TimeArgument
from .planar import critical_data, critical_time

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"

__all__ = [
    "ABC",
    "PBC",
    "IMAGINARY_TIME",
    "REAL_TIME",
    "ChainSpec",
    "LogPolarAmplitude",
    "TimeArgument",
    "amplitude",
    "critical_data",
    "critical_time",
    "log_amplitude",
]
