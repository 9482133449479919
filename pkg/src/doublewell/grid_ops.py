"""Uniform tensor grids, finite-difference operators and slice extraction.

Every grid lives on the lattice ``h * Z^nu`` anchored at the origin, so grids
built with the same spacing share nodes and functions can be restricted or
shifted between them by pure index arithmetic.  Boundary walls (Dirichlet,
value 0) sit one spacing outside the first and last stored node on each axis.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sps

from .errors import (
    GridMismatch,
    InvalidDimension,
    MisalignedPlane,
    MisalignedTranslation,
    NonPositiveSpacing,
)

# Box half-width beyond the support, in units of the slowest decay length.
SIZING_DECAY_LENGTHS = 12.0
_ALIGN_TOL = 1e-9


def lattice_index(x: float, h: float) -> int | None:
    """Return ``x / h`` if it is an integer (to rounding), else None."""
    q = x / h
    k = round(q)
    if abs(q - k) > _ALIGN_TOL * max(1.0, abs(q)):
        return None
    return int(k)


@dataclass(frozen=True)
class Grid:
    """Interior nodes ``(lo[k] + i) * h`` for ``i < n[k]`` on each axis."""

    nu: int
    h: float
    lo: tuple[int, ...]
    n: tuple[int, ...]
    d: float = 0.0
    d_requested: float | None = None

    def __post_init__(self):
        if self.nu not in (1, 2):
            raise InvalidDimension(f"nu must be 1 or 2, got {self.nu}")
        if not self.h > 0:
            raise NonPositiveSpacing(f"h must be positive, got {self.h}")
        if len(self.lo) != self.nu or len(self.n) != self.nu:
            raise InvalidDimension("lo and n must have one entry per axis")
        if min(self.n) < 3:
            raise ValueError("need at least 3 points per axis")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.n)

    @property
    def size(self) -> int:
        return int(np.prod(self.n))

    @property
    def cell_volume(self) -> float:
        return self.h**self.nu

    @property
    def origin(self) -> tuple[float, ...]:
        """Coordinates of the first stored node."""
        return tuple(k * self.h for k in self.lo)

    @property
    def d_snapped(self) -> bool:
        return self.d_requested is not None and self.d_requested != self.d

    def axis(self, k: int) -> np.ndarray:
        return (self.lo[k] + np.arange(self.n[k])) * self.h

    def walls(self, k: int) -> tuple[float, float]:
        return ((self.lo[k] - 1) * self.h, (self.lo[k] + self.n[k]) * self.h)

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*[self.axis(k) for k in range(self.nu)], indexing="ij")

    def radius(self, center: float = 0.0) -> np.ndarray:
        """Distance of every node from ``(center, 0, ...)``."""
        xs = list(self.mesh())
        k = lattice_index(center, self.h)
        if k is not None:
            # integer offsets keep translated wells bit-identical copies
            xs[0] = np.meshgrid(
                (self.lo[0] - k + np.arange(self.n[0])) * self.h,
                *[self.axis(i) for i in range(1, self.nu)],
                indexing="ij",
            )[0]
            center = 0.0
        r2 = (xs[0] - center) ** 2
        for x in xs[1:]:
            r2 = r2 + x**2
        return np.sqrt(r2)

    def node_index(self, c: float, axis: int = 0) -> int | None:
        k = lattice_index(c, self.h)
        if k is None:
            return None
        i = k - self.lo[axis]
        if not 0 <= i < self.n[axis]:
            return None
        return i

    def same_lattice(self, other: "Grid") -> bool:
        return self.nu == other.nu and self.h == other.h

    def compatible(self, other: "Grid") -> bool:
        return self.same_lattice(other) and self.lo == other.lo and self.n == other.n

    def single_well_grid(self) -> "Grid":
        """Grid symmetric about x1 = 0 that covers this grid and every node
        reached by translating it back by ``d``.

        Single-well states solved here can be restricted to this grid, and
        their translates by ``d`` need no zero filling.
        """
        top = self.lo[0] + self.n[0]  # wall index on the right
        lo0 = min(self.lo[0] - round(self.d / self.h), -(top - 1))
        half = max(-lo0, top - 1)
        return Grid(
            nu=self.nu,
            h=self.h,
            lo=(-half,) + self.lo[1:],
            n=(2 * half + 1,) + self.n[1:],
            d=self.d,
            d_requested=self.d_requested,
        )

    def describe(self) -> dict:
        return {
            "nu": self.nu,
            "h": self.h,
            "n": list(self.n),
            "origin": list(self.origin),
            "d": self.d,
            "d_requested": self.d if self.d_requested is None else self.d_requested,
        }


def build_grid(nu: int, d: float, kappa_min: float, h: float, a: float = 1.0) -> Grid:
    """Box ``[-L, d+L] x [-L, L]^(nu-1)`` with ``L >= a + 12/kappa_min``.

    ``d`` is snapped to the nearest even multiple of ``h`` so that 0, d/2 and
    d are all nodes; the requested value is kept in ``Grid.d_requested``.
    """
    if nu not in (1, 2):
        raise InvalidDimension(f"nu must be 1 or 2, got {nu}")
    if not h > 0:
        raise NonPositiveSpacing(f"h must be positive, got {h}")
    if not kappa_min > 0:
        raise ValueError("kappa_min must be positive")
    if d < 0:
        raise ValueError("d must be non-negative")
    half_d = round(d / (2 * h))
    nd = 2 * half_d
    nl = math.ceil((a + SIZING_DECAY_LENGTHS / kappa_min) / h - 1e-9)
    lo = (-nl + 1,) + (-nl + 1,) * (nu - 1)
    n = (nd + 2 * nl - 1,) + (2 * nl - 1,) * (nu - 1)
    return Grid(nu=nu, h=h, lo=lo, n=n, d=nd * h, d_requested=d)


@dataclass
class GridFunction:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != self.grid.shape:
            if self.values.size != self.grid.size:
                raise GridMismatch(
                    f"{self.values.size} values for a grid of {self.grid.size} nodes"
                )
            self.values = self.values.reshape(self.grid.shape)

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def inner(self, other: "GridFunction") -> float:
        if not self.grid.compatible(other.grid):
            raise GridMismatch("inner product of functions on different grids")
        return float(self.grid.cell_volume * np.vdot(self.flat, other.flat).real)

    def norm(self) -> float:
        return math.sqrt(self.grid.cell_volume) * float(np.linalg.norm(self.flat))

    def __add__(self, other: "GridFunction") -> "GridFunction":
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, s: float) -> "GridFunction":
        return GridFunction(self.grid, self.values * s)

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.grid, -self.values)


@dataclass
class SparseOperator:
    """A symmetric sparse matrix acting on functions over ``grid``."""

    grid: Grid
    matrix: sps.csr_matrix = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def apply(self, f: GridFunction) -> GridFunction:
        if not f.grid.compatible(self.grid):
            raise GridMismatch("operator and function live on different grids")
        return GridFunction(self.grid, self.matrix @ f.flat)

    def shifted(self, s: float) -> "SparseOperator":
        """Return ``A - s * 1``."""
        eye = sps.identity(self.dimension, format="csr")
        return SparseOperator(self.grid, (self.matrix - s * eye).tocsr())

    def gershgorin_bounds(self) -> tuple[float, float]:
        m = self.matrix.tocsr()
        diag = m.diagonal()
        off = np.asarray(abs(m).sum(axis=1)).ravel() - np.abs(diag)
        return float(np.min(diag - off)), float(np.max(diag + off))


def _second_difference(n: int, h: float) -> sps.csr_matrix:
    main = np.full(n, 2.0)
    side = np.full(n - 1, -1.0)
    return (sps.diags([side, main, side], [-1, 0, 1], format="csr")) / h**2


def discrete_laplacian(grid: Grid) -> SparseOperator:
    """Second-order (2 nu + 1)-point stencil for ``-Laplacian`` with Dirichlet walls."""
    if grid.nu == 1:
        m = _second_difference(grid.n[0], grid.h)
    else:
        # x1 is the slow index in row-major order.
        m = sps.kronsum(
            _second_difference(grid.n[1], grid.h),
            _second_difference(grid.n[0], grid.h),
            format="csr",
        )
    return SparseOperator(grid, m.tocsr())


def assemble_hamiltonian(grid: Grid, pot: GridFunction) -> SparseOperator:
    if not pot.grid.compatible(grid):
        raise GridMismatch("potential does not live on the requested grid")
    lap = discrete_laplacian(grid)
    m = lap.matrix + sps.diags(pot.flat.astype(float), 0, format="csr")
    return SparseOperator(grid, m.tocsr())


def slice_and_normal_derivative(f: GridFunction, c: float) -> tuple[np.ndarray, np.ndarray]:
    """Values on ``{x1 = c}`` and their central-difference x1-derivative."""
    i = f.grid.node_index(c)
    if i is None or i < 1 or i > f.grid.n[0] - 2:
        raise MisalignedPlane(f"x1 = {c} is not an interior node of the grid")
    v = f.values
    h = f.grid.h
    return np.array(v[i]), (v[i + 1] - v[i - 1]) / (2 * h)


def translate(f: GridFunction, d: float) -> GridFunction:
    """``(R^d f)(x) = f(x - d e1)``, zero-filled where ``x - d e1`` is off-grid."""
    s = lattice_index(d, f.grid.h)
    if s is None:
        raise MisalignedTranslation(f"d = {d} is not a multiple of h = {f.grid.h}")
    out = np.zeros_like(f.values)
    n0 = f.grid.n[0]
    if abs(s) < n0:
        if s >= 0:
            out[s:] = f.values[: n0 - s]
        else:
            out[: n0 + s] = f.values[-s:]
    return GridFunction(f.grid, out)


def restrict(f: GridFunction, grid: Grid) -> GridFunction:
    """Copy of ``f`` on a sub-box ``grid`` of the same lattice."""
    if not f.grid.same_lattice(grid):
        raise GridMismatch("grids do not share a lattice")
    sl = []
    for k in range(grid.nu):
        off = grid.lo[k] - f.grid.lo[k]
        if off < 0 or off + grid.n[k] > f.grid.n[k]:
            raise GridMismatch("target grid is not contained in the source grid")
        sl.append(slice(off, off + grid.n[k]))
    return GridFunction(grid, f.values[tuple(sl)].copy())


def write_gridfunction(path: str | Path, f: GridFunction) -> None:
    """Header ``(nu, n_1..n_nu, h, origin_1..origin_nu)`` as little-endian
    doubles, then the row-major values."""
    g = f.grid
    header = [float(g.nu), *map(float, g.n), g.h, *g.origin]
    with open(path, "wb") as fh:
        fh.write(struct.pack(f"<{len(header)}d", *header))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_gridfunction(path: str | Path) -> GridFunction:
    raw = Path(path).read_bytes()
    (nu,) = struct.unpack_from("<d", raw, 0)
    nu = int(nu)
    nhead = 1 + nu + 1 + nu
    header = struct.unpack_from(f"<{nhead}d", raw, 0)
    n = tuple(int(x) for x in header[1 : 1 + nu])
    h = header[1 + nu]
    origin = header[2 + nu :]
    lo = tuple(int(round(o / h)) for o in origin)
    values = np.frombuffer(raw, dtype="<f8", offset=8 * nhead).reshape(n)
    return GridFunction(Grid(nu=nu, h=h, lo=lo, n=n), values.copy())
