"""Predator-prey reaction-diffusion with a predator exclusion zone and a strong Allee effect."""

from __future__ import annotations

__version__ = "0.1.0"

from .dynamics import ModelParams, State, Trajectory, preset, simulate
from .errors import (
    ConfigError,
    DomainError,
    ExzoneError,
    HypothesisError,
    InsufficientTail,
    SizeMismatch,
    SolverError,
)
from .grid import DualGrid, build_grid, default_resolution
from .growth import GrowthFn, make_growth

__all__ = [
    "__version__",
    "GrowthFn",
    "make_growth",
    "DualGrid",
    "build_grid",
    "default_resolution",
    "ModelParams",
    "State",
    "Trajectory",
    "preset",
    "simulate",
    "ExzoneError",
    "DomainError",
    "HypothesisError",
    "SizeMismatch",
    "SolverError",
    "InsufficientTail",
    "ConfigError",
]
