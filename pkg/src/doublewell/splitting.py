"""Double-well splittings, the two-level reduction and its correction terms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .eigensolve import EigenPair, Parity, eigenpairs_near, orthonormal_basis
from .errors import GridMismatch, OverlapTooLarge, WrongClusterSize
from .grid_ops import GridFunction, SparseOperator, restrict, translate


@dataclass
class SplittingResult:
    j: int
    d: float
    E_minus: float
    E_plus: float
    Delta: float
    ratio: float
    pairing_score: float
    parity_minus: Parity = Parity.NONE
    parity_plus: Parity = Parity.NONE


@dataclass
class TwoLevelModel:
    M: np.ndarray
    S: np.ndarray
    predicted_split: float

    @property
    def overlap(self) -> float:
        return float(self.S[0, 1])


@dataclass
class CorrectionsReport:
    r1: float
    r2: float
    r3: float
    diagonal_shift: float


def pair_on_grid(phi: EigenPair, d: float, grid) -> tuple[GridFunction, GridFunction]:
    """``phi`` and ``R^d phi`` restricted to the double-well ``grid``."""
    f = phi.vector
    if f.grid.compatible(grid):
        return f, translate(f, d)
    try:
        return restrict(f, grid), restrict(translate(f, d), grid)
    except GridMismatch as exc:
        raise GridMismatch("single-well state does not cover the double-well grid") from exc


def principal_cosines(a: list[GridFunction], b: list[GridFunction]) -> np.ndarray:
    qa = orthonormal_basis(a)
    qb = orthonormal_basis(b)
    return np.linalg.svd(qa.T @ qb, compute_uv=False)


def double_well_levels(
    H_dw: SparseOperator,
    phi_j: EigenPair,
    d: float,
    gamma_j: float,
    j: int = 1,
    rho: float | None = None,
    tol: float | None = None,
) -> SplittingResult:
    """The pair of double-well levels born from ``e_j``.

    Every eigenvalue in ``(e_j - gamma_j/2, e_j + gamma_j/2)`` is computed;
    exactly two are expected.
    """
    e = phi_j.energy
    lo, hi = e - gamma_j / 2, e + gamma_j / 2
    sigma = e - gamma_j / 4
    k = 4
    while True:
        k = min(k, H_dw.dimension)
        pairs = eigenpairs_near(H_dw, sigma, k, tol=tol, parity_plane=d / 2)
        # the window is covered once some computed level lies beyond it
        far = max(abs(p.energy - sigma) for p in pairs)
        if far >= hi - sigma or k == H_dw.dimension:
            break
        k *= 2
    inside = [p for p in pairs if lo < p.energy < hi]
    if len(inside) != 2:
        raise WrongClusterSize(len(inside))
    minus, plus = sorted(inside, key=lambda p: p.energy)
    f0, fd = pair_on_grid(phi_j, d, H_dw.grid)
    score = float(np.min(principal_cosines([minus.vector, plus.vector], [f0, fd])))
    delta = plus.energy - minus.energy
    ratio = delta / (2 * abs(rho)) if rho else float("nan")
    return SplittingResult(
        j=j,
        d=d,
        E_minus=minus.energy,
        E_plus=plus.energy,
        Delta=delta,
        ratio=ratio,
        pairing_score=score,
        parity_minus=minus.parity,
        parity_plus=plus.parity,
    )


def generalized_split(M: np.ndarray, S: np.ndarray) -> float:
    """Distance between the two roots of ``det(M - w S) = 0``."""
    qa = S[0, 0] * S[1, 1] - S[0, 1] ** 2
    qb = -(M[0, 0] * S[1, 1] + M[1, 1] * S[0, 0] - 2 * M[0, 1] * S[0, 1])
    qc = M[0, 0] * M[1, 1] - M[0, 1] ** 2
    disc = qb * qb - 4 * qa * qc
    return math.sqrt(max(disc, 0.0)) / qa


def two_level_matrix(
    phi_j: EigenPair, H_dw: SparseOperator, d: float, e_j: float | None = None
) -> TwoLevelModel:
    """Matrix of ``H - e_j`` and Gram matrix on ``span{phi_j, R^d phi_j}``."""
    e_j = phi_j.energy if e_j is None else e_j
    basis = pair_on_grid(phi_j, d, H_dw.grid)
    shifted = H_dw.shifted(e_j)
    images = [shifted.apply(f) for f in basis]
    M = np.array([[f.inner(g) for g in images] for f in basis])
    M = 0.5 * (M + M.T)
    S = np.array([[f.inner(g) for g in basis] for f in basis])
    S = 0.5 * (S + S.T)
    s = S[0, 1] / math.sqrt(S[0, 0] * S[1, 1])
    if abs(s) > 0.99:
        raise OverlapTooLarge(f"overlap {s:.4f} too large for the two-level model")
    return TwoLevelModel(M=M, S=S, predicted_split=generalized_split(M, S))


def corrections_report(
    phi_j: EigenPair,
    pot_single: GridFunction,
    d: float,
    rho: float,
    H_dw: SparseOperator,
    e_j: float | None = None,
) -> CorrectionsReport:
    """Dimensionless size of the terms that separate the splitting from ``2|rho|``.

    r1 is the diagonal shift ``lambda^2 <phi, (R^d v) phi>`` over ``|rho|``,
    r2 the overlap ``|<phi, R^d phi>|``, and r3 the diagonal matrix element of
    ``H - e`` on the translate orthonormalised against ``phi`` (Gram-Schmidt,
    denominator ``sqrt(1 - s^2)``), over ``|rho|``.
    """
    e_j = phi_j.energy if e_j is None else e_j
    f = phi_j.vector
    shift = float(f.grid.cell_volume * np.sum(f.values**2 * translate(pot_single, d).values))
    f0, fd = pair_on_grid(phi_j, d, H_dw.grid)
    s = f0.inner(fd) / (f0.norm() * fd.norm())
    tilde = (fd - f0 * (f0.inner(fd) / f0.inner(f0))) * (1.0 / math.sqrt(1.0 - s * s))
    diag = tilde.inner(H_dw.shifted(e_j).apply(tilde))
    return CorrectionsReport(
        r1=abs(shift) / abs(rho),
        r2=abs(s),
        r3=abs(diag) / abs(rho),
        diagonal_shift=shift,
    )
