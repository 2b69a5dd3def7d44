"""Dirac modes on a Reissner-Nordstrom black hole in horizon-penetrating coordinates."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:
    __version__ = "0.1.0"

from .geometry import BlackHole, ExtremalError, Region
from .radial_solver import ModeIndex, SolverError

__all__ = ["BlackHole", "ExtremalError", "ModeIndex", "Region", "SolverError", "__version__"]
