"""Hopping coefficient by volume, surface and reflection formulas; 1D tail amplitudes.

All functions take the single-well state on a grid symmetric about x1 = 0
that is wide enough for the translate by ``d`` to need no zero filling
(see ``Grid.single_well_grid``).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .eigensolve import EigenPair, Parity
from .errors import (
    MisalignedTranslation,
    NoDefiniteParity,
    PlaneInsideSupport,
    SeparationTooSmall,
    SignChangeInWindow,
    TailTooShort,
)
from .grid_ops import GridFunction, lattice_index, slice_and_normal_derivative, translate

# Fit windows for the exponential tails, in decay lengths past the support.
TAIL_WINDOW = (2.0, 8.0)


@dataclass
class TailAmplitudes:
    A_plus: float
    A_minus: float
    kappa: float
    fit_residual: float


@dataclass
class HoppingResult:
    j: int
    d: float
    rho_volume: float
    rho_surface: float
    rho_symmetric: float | None
    plane_c: float
    tail: TailAmplitudes | None = None

    CSV_FIELDS = (
        "j", "d", "rho_volume", "rho_surface", "rho_symmetric", "plane_c",
        "A_plus", "A_minus", "kappa", "fit_residual",
    )

    def row(self) -> dict:
        tail = asdict(self.tail) if self.tail else {}
        return {
            "j": self.j,
            "d": self.d,
            "rho_volume": self.rho_volume,
            "rho_surface": self.rho_surface,
            "rho_symmetric": self.rho_symmetric,
            "plane_c": self.plane_c,
            "A_plus": tail.get("A_plus"),
            "A_minus": tail.get("A_minus"),
            "kappa": tail.get("kappa"),
            "fit_residual": tail.get("fit_residual"),
        }

    def max_relative_deviation(self) -> float:
        vals = [self.rho_volume, self.rho_surface]
        if self.rho_symmetric is not None:
            vals.append(self.rho_symmetric)
        return max_pairwise_relative_deviation(vals)


def max_pairwise_relative_deviation(values) -> float:
    worst = 0.0
    for i, x in enumerate(values):
        for y in values[i + 1 :]:
            scale = max(abs(x), abs(y))
            if scale > 0:
                worst = max(worst, abs(x - y) / scale)
    return worst


def _support_radius(pot: GridFunction) -> float:
    nz = np.nonzero(pot.values)
    if not len(nz[0]):
        return 0.0
    r = pot.grid.radius()
    return float(np.max(r[nz]))


def rho_volume(
    phi: EigenPair, pot_single: GridFunction, d: float, allow_overlap: bool = False
) -> float:
    """``h^nu * sum(phi * lambda^2 v * R^d phi)``.

    ``pot_single`` holds ``lambda^2 v`` sampled on the same grid as ``phi``.
    With ``allow_overlap`` any aligned ``d`` is accepted, including 0.
    """
    if lattice_index(d, phi.vector.grid.h) is None:
        raise MisalignedTranslation(f"d = {d} is not a multiple of h")
    if not allow_overlap:
        a = _support_radius(pot_single)
        if d <= 2 * a:
            raise SeparationTooSmall(f"d = {d} does not separate supports of radius {a}")
    f = phi.vector
    psi = translate(f, d)
    return float(f.grid.cell_volume * np.sum(f.values * pot_single.values * psi.values))


def rho_surface(phi: EigenPair, d: float, c: float | None = None, a: float = 0.0) -> float:
    """Flux of the Wronskian of ``phi`` and ``R^d phi`` through ``{x1 = c}``."""
    c = d / 2 if c is None else c
    if c <= a or c >= d - a:
        raise PlaneInsideSupport(f"plane x1 = {c} meets a well support (a = {a}, d = {d})")
    f = phi.vector
    psi = translate(f, d)
    s_phi, ds_phi = slice_and_normal_derivative(f, c)
    s_psi, ds_psi = slice_and_normal_derivative(psi, c)
    flux = ds_phi * s_psi - s_phi * ds_psi
    return float(f.grid.h ** (f.grid.nu - 1) * np.sum(flux))


def slice_norm_profile(f: GridFunction) -> np.ndarray:
    """``g(x1) = integral |f(x1, x_perp)|^2 dx_perp`` at every x1 node."""
    sq = np.abs(f.values) ** 2
    if f.grid.nu == 1:
        return sq
    return f.grid.h ** (f.grid.nu - 1) * sq.reshape(f.grid.n[0], -1).sum(axis=1)


def rho_symmetric(phi: EigenPair, d: float, parity: Parity | None = None) -> float:
    """``+/- d/dx1 g`` at ``x1 = d/2``, with ``+`` for even and ``-`` for odd ``phi``.

    The parity is that of the single-well state about x1 = 0.
    """
    parity = phi.parity if parity is None else Parity(parity)
    if parity is Parity.NONE:
        raise NoDefiniteParity("reflection formula needs an even or odd state")
    g = slice_norm_profile(phi.vector)
    grid = phi.vector.grid
    i = grid.node_index(d / 2)
    if i is None or i < 1 or i > grid.n[0] - 2:
        raise MisalignedTranslation(f"d/2 = {d / 2} and its neighbours must be grid nodes")
    slope = (g[i + 1] - g[i - 1]) / (2 * grid.h)
    return float(slope if parity is Parity.EVEN else -slope)


def _outermost_zero(x: np.ndarray, f: np.ndarray) -> float:
    # sign flips in the far tail, where |f| is at solver noise level, are not nodes
    keep = np.abs(f) > 1e-8 * np.max(np.abs(f))
    x, f = x[keep], f[keep]
    s = np.sign(f)
    flips = np.nonzero(s[:-1] * s[1:] < 0)[0]
    return float(np.max(np.abs(x[flips]))) if len(flips) else 0.0


def extract_tail_amplitudes_1d(phi: EigenPair, a: float) -> TailAmplitudes:
    """Fit ``phi = A_- e^{kappa x}`` left of the well and ``A_+ e^{-kappa x}`` right of it.

    ``kappa = sqrt(-e)`` is held fixed; each amplitude is the least-squares
    intercept of ``log|phi| +/- kappa x`` over a window 2 to 8 decay lengths
    past the support (or past the outermost node of ``phi``).
    """
    f = phi.vector
    if f.grid.nu != 1:
        raise ValueError("tail amplitudes are defined for nu = 1 only")
    if not phi.energy < 0:
        raise ValueError("tail amplitudes need a bound state")
    kappa = math.sqrt(-phi.energy)
    x = f.grid.axis(0)
    y = f.values
    start = max(a, _outermost_zero(x, y))
    lo, hi = start + TAIL_WINDOW[0] / kappa, start + TAIL_WINDOW[1] / kappa
    left_wall, right_wall = f.grid.walls(0)
    if hi >= right_wall or -hi <= left_wall:
        raise TailTooShort(f"tail window [{lo:.3g}, {hi:.3g}] exceeds the box")

    amps = []
    worst = 0.0
    for sign in (+1, -1):
        m = (sign * x >= lo) & (sign * x <= hi)
        ys = y[m]
        if np.any(ys == 0) or np.any(np.sign(ys) != np.sign(ys[0])):
            raise SignChangeInWindow("phi changes sign inside the tail fit window")
        log_amp = np.mean(np.log(np.abs(ys)) + sign * kappa * x[m])
        amp = math.copysign(math.exp(log_amp), ys[0])
        model = amp * np.exp(-sign * kappa * x[m])
        worst = max(worst, float(np.max(np.abs(ys / model - 1.0))))
        amps.append(amp)
    return TailAmplitudes(A_plus=amps[0], A_minus=amps[1], kappa=kappa, fit_residual=worst)


def rho_from_tails(tail: TailAmplitudes, d: float) -> float:
    """Closed-form 1D hopping ``-2 A_+ A_- kappa e^{-kappa d}`` (real states)."""
    return -2.0 * tail.A_plus * tail.A_minus * tail.kappa * math.exp(-tail.kappa * d)


def compute_hopping(
    j: int,
    phi: EigenPair,
    pot_single: GridFunction,
    d: float,
    a: float,
    symmetric: bool,
    c: float | None = None,
) -> HoppingResult:
    """All available hopping formulas for one level at one separation."""
    c = d / 2 if c is None else c
    rho_sym = None
    if symmetric and phi.parity is not Parity.NONE:
        rho_sym = rho_symmetric(phi, d)
    tail = None
    if phi.vector.grid.nu == 1:
        try:
            tail = extract_tail_amplitudes_1d(phi, a)
        except (TailTooShort, SignChangeInWindow):
            tail = None
    return HoppingResult(
        j=j,
        d=d,
        rho_volume=rho_volume(phi, pot_single, d),
        rho_surface=rho_surface(phi, d, c, a),
        rho_symmetric=rho_sym,
        plane_c=c,
        tail=tail,
    )
