"""Hopping coefficients and tunnelling splittings of finite-difference double wells."""

from .eigensolve import EigenPair, Parity, lowest_k
from .grid_ops import Grid, GridFunction, build_grid
from .potential import DoubleWellConfig, PotentialSpec, Shape
from .sweep import SweepRecord, SweepSettings, evaluate_checks, run_sweep

__all__ = [
    "DoubleWellConfig",
    "EigenPair",
    "Grid",
    "GridFunction",
    "Parity",
    "PotentialSpec",
    "Shape",
    "SweepRecord",
    "SweepSettings",
    "build_grid",
    "evaluate_checks",
    "lowest_k",
    "run_sweep",
]

__version__ = "0.1.0"
