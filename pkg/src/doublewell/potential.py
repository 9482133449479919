"""Compactly supported single wells, double-well assembly and reflections."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import BoxTooSmall, MisalignedPlane, SeparationTooSmall
from .grid_ops import Grid, GridFunction


class Shape(str, Enum):
    SQUARE_WELL = "SquareWell"
    SMOOTH_BUMP = "SmoothBump"
    TABULATED_RADIAL = "TabulatedRadial"


@dataclass(frozen=True)
class PotentialSpec:
    """Single well ``lambda_sq * v`` with ``v = 0`` outside the ball of radius ``a``.

    ``v`` is normalised to depth 1 for the built-in shapes.  For
    ``TabulatedRadial`` the profile is given as samples ``(table_r, table_v)``
    and interpolated linearly.
    """

    shape: Shape
    a: float
    lambda_sq: float
    reflection_symmetric: bool = True
    table_r: tuple[float, ...] = field(default=())
    table_v: tuple[float, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "shape", Shape(self.shape))
        if not self.a > 0:
            raise ValueError("support radius a must be positive")
        if not self.lambda_sq > 0:
            raise ValueError("lambda_sq must be positive")
        if self.shape is Shape.TABULATED_RADIAL:
            r = np.asarray(self.table_r, dtype=float)
            if len(r) < 2 or len(r) != len(self.table_v) or np.any(np.diff(r) <= 0):
                raise ValueError("tabulated profile needs >= 2 increasing radii with one value each")
            object.__setattr__(self, "table_r", tuple(map(float, self.table_r)))
            object.__setattr__(self, "table_v", tuple(map(float, self.table_v)))

    def profile(self, r: np.ndarray) -> np.ndarray:
        """Radial profile ``v(r)`` (without the ``lambda_sq`` factor)."""
        r = np.asarray(r, dtype=float)
        a = self.a
        inside = r <= a
        if self.shape is Shape.SQUARE_WELL:
            return np.where(inside, -1.0, 0.0)
        if self.shape is Shape.SMOOTH_BUMP:
            out = np.zeros_like(r)
            m = r < a
            out[m] = -np.exp(1.0 - a * a / (a * a - r[m] ** 2))
            return out
        vals = np.interp(r, self.table_r, self.table_v)
        return np.where(inside, vals, 0.0)

    def to_dict(self) -> dict:
        out = {
            "shape": self.shape.value,
            "a": self.a,
            "lambda_sq": self.lambda_sq,
            "reflection_symmetric": self.reflection_symmetric,
        }
        if self.shape is Shape.TABULATED_RADIAL:
            out["table_r"] = list(self.table_r)
            out["table_v"] = list(self.table_v)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PotentialSpec":
        return cls(
            shape=Shape(data["shape"]),
            a=float(data["a"]),
            lambda_sq=float(data["lambda_sq"]),
            reflection_symmetric=bool(data.get("reflection_symmetric", True)),
            table_r=tuple(data.get("table_r", ())),
            table_v=tuple(data.get("table_v", ())),
        )


@dataclass(frozen=True)
class DoubleWellConfig:
    spec: PotentialSpec
    d: float

    def __post_init__(self):
        if not self.d > 2 * self.spec.a:
            raise SeparationTooSmall(f"d = {self.d} must exceed 2a = {2 * self.spec.a}")


def eval_single_well(spec: PotentialSpec, x) -> float | np.ndarray:
    """``v(x)`` at a point, or at an array of points with the last axis of length nu."""
    x = np.asarray(x, dtype=float)
    r = np.abs(x) if x.ndim == 0 else np.linalg.norm(x, axis=-1)
    out = spec.profile(r)
    return float(out) if np.ndim(out) == 0 else out


def sample_single_well(spec: PotentialSpec, grid: Grid, center: float = 0.0) -> GridFunction:
    """Nodal samples of ``lambda_sq * v(x - center e1)``."""
    return GridFunction(grid, spec.lambda_sq * spec.profile(grid.radius(center)))


def _check_box(spec: PotentialSpec, grid: Grid, d: float) -> None:
    a, h = spec.a, grid.h
    left, right = grid.walls(0)
    if -a - left <= h or right - (d + a) <= h:
        raise BoxTooSmall("well support lies within one spacing of the x1 walls")
    for k in range(1, grid.nu):
        lo, hi = grid.walls(k)
        if -a - lo <= h or hi - a <= h:
            raise BoxTooSmall(f"well support lies within one spacing of the axis-{k + 1} walls")


def assemble_double_well(cfg: DoubleWellConfig, grid: Grid) -> GridFunction:
    """Nodal samples of ``lambda_sq * (v(x) + v(x - d e1))``."""
    if not cfg.d > 2 * cfg.spec.a:
        raise SeparationTooSmall(f"d = {cfg.d} must exceed 2a = {2 * cfg.spec.a}")
    _check_box(cfg.spec, grid, cfg.d)
    left = sample_single_well(cfg.spec, grid, 0.0)
    right = sample_single_well(cfg.spec, grid, cfg.d)
    return GridFunction(grid, left.values + right.values)


def reflect(f: GridFunction, c: float) -> GridFunction:
    """``(U f)(x1, x_perp) = f(2c - x1, x_perp)``.

    ``c`` must be a node or a midpoint between nodes.  Nodes whose mirror
    image falls outside the grid receive 0, so ``U`` is an exact involution
    only on grids symmetric about ``c``.
    """
    g = f.grid
    q = 2 * c / g.h
    m = round(q)
    if abs(q - m) > 1e-9 * max(1.0, abs(q)):
        raise MisalignedPlane(f"plane x1 = {c} is not on the half-lattice of h = {g.h}")
    # node index i (coordinate lo + i) maps to m - lo - i - lo
    src = m - 2 * g.lo[0] - np.arange(g.n[0])
    ok = (src >= 0) & (src < g.n[0])
    out = np.zeros_like(f.values)
    out[ok] = f.values[src[ok]]
    return GridFunction(g, out)
