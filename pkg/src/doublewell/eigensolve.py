"""Lowest eigenpairs and deflated minimum singular values of sparse symmetric operators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .errors import DegenerateBasis, NoConvergence
from .grid_ops import GridFunction, SparseOperator

DEFAULT_RELATIVE_TOL = 1e-10
# Below this many unknowns the dense path is used.
DENSE_LIMIT = 400
# Labels states with a parity defect below this; check_parity is the strict test.
PARITY_LABEL_TOL = 1e-6
# Krylov vectors kept beyond k; a wider basis means far fewer ARPACK restarts.
KRYLOV_EXTRA = 20


class Parity(str, Enum):
    EVEN = "Even"
    ODD = "Odd"
    NONE = "None"


@dataclass
class EigenPair:
    energy: float
    vector: GridFunction
    residual: float
    parity: Parity = Parity.NONE

    @property
    def bound(self) -> bool:
        return self.energy < 0

    @property
    def kappa(self) -> float:
        return math.sqrt(-self.energy) if self.energy < 0 else float("nan")


@dataclass(frozen=True)
class SpectralGap:
    level: int
    gamma: float
    degenerate: bool = False


def default_tolerance(op: SparseOperator, rel: float = DEFAULT_RELATIVE_TOL) -> float:
    """Absolute residual tolerance ``rel`` times the Gershgorin spectral radius."""
    lo, hi = op.gershgorin_bounds()
    return rel * max(abs(lo), abs(hi))


def _start_vector(n: int) -> np.ndarray:
    # Fixed start vector keeps ARPACK runs bit-reproducible.
    return np.cos(0.7 * np.arange(n)) + 1.5


def _factorize(matrix):
    # symmetric minimum-degree ordering roughly halves fill on grid Laplacians
    return spla.splu(
        sps.csc_matrix(matrix),
        permc_spec="MMD_AT_PLUS_A",
        diag_pivot_thresh=0.01,
        options={"SymmetricMode": True},
    )


def _fix_phase(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v)))  # first index of the maximum wins
    return -v if v[i] < 0 else v


def parity_defect(f: GridFunction, center: float) -> tuple[Parity, float]:
    """``min(|Uf - f|, |Uf + f|)`` about the plane ``x1 = center``."""
    from .potential import reflect

    uf = reflect(f, center)
    even = (uf - f).norm()
    odd = (uf + f).norm()
    return (Parity.EVEN, even) if even <= odd else (Parity.ODD, odd)


def _sorted_pairs(op, w, vecs, tol, parity_plane, cluster_tol):
    grid = op.grid
    order = np.argsort(w, kind="stable")
    w = np.asarray(w)[order]
    vecs = vecs[:, order]
    if parity_plane is not None:
        vecs = _split_clusters_by_parity(grid, w, vecs, parity_plane, cluster_tol)
    scale = 1.0 / math.sqrt(grid.cell_volume)
    pairs = []
    for e, v in zip(w, vecs.T):
        v = _fix_phase(v / np.linalg.norm(v)) * scale
        f = GridFunction(grid, v.copy())
        res = (op.apply(f) - f * float(e)).norm()
        if res > tol:
            raise NoConvergence(0, f"residual {res:.3e} exceeds tolerance {tol:.3e} at energy {e:.12g}")
        parity = Parity.NONE
        if parity_plane is not None:
            label, defect = parity_defect(f, parity_plane)
            if defect <= PARITY_LABEL_TOL:
                parity = label
        pairs.append(EigenPair(float(e), f, float(res), parity))
    return pairs


def _split_clusters_by_parity(grid, w, vecs, plane, cluster_tol):
    """Rotate each near-degenerate cluster onto eigenvectors of the reflection."""
    from .potential import reflect

    vecs = vecs.copy()
    i = 0
    while i < len(w):
        j = i + 1
        while j < len(w) and w[j] - w[j - 1] <= cluster_tol:
            j += 1
        if j - i > 1:
            block, _ = np.linalg.qr(vecs[:, i:j])
            ub = np.column_stack(
                [reflect(GridFunction(grid, block[:, k]), plane).flat for k in range(j - i)]
            )
            small = block.T @ ub
            _, rot = np.linalg.eigh(0.5 * (small + small.T))
            vecs[:, i:j] = block @ rot
        i = j
    return vecs


def eigenpairs_near(
    op: SparseOperator,
    sigma: float,
    k: int,
    tol: float | None = None,
    parity_plane: float | None = None,
    cluster_tol: float = 1e-9,
    max_restarts: int | None = None,
) -> list[EigenPair]:
    """The ``k`` eigenpairs closest to ``sigma`` (Lanczos on the shift-inverted operator)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    tol = default_tolerance(op) if tol is None else tol
    n = op.dimension
    if k > n:
        raise ValueError(f"asked for {k} eigenpairs of a {n}x{n} operator")
    if n <= DENSE_LIMIT or k >= n - 1:
        w, vecs = sla.eigh(op.matrix.toarray())
        idx = np.argsort(np.abs(w - sigma), kind="stable")[:k]
        w, vecs = w[idx], vecs[:, idx]
    else:
        maxiter = max_restarts if max_restarts is not None else 50 * k
        lu = _factorize(op.shifted(sigma).matrix)
        opinv = spla.LinearOperator((n, n), matvec=lu.solve, dtype=float)
        lo, hi = op.gershgorin_bounds()
        # Ritz tolerance matching the absolute target; machine precision as fallback
        for rel in (0.1 * tol / max(abs(lo), abs(hi), abs(sigma)), 0.0):
            try:
                w, vecs = spla.eigsh(
                    op.matrix,
                    k=k,
                    sigma=sigma,
                    which="LM",
                    OPinv=opinv,
                    v0=_start_vector(n),
                    tol=rel,
                    maxiter=maxiter,
                    ncv=min(n - 1, max(2 * k + 1, k + KRYLOV_EXTRA)),
                )
            except spla.ArpackNoConvergence as exc:
                raise NoConvergence(maxiter) from exc
            try:
                return _sorted_pairs(op, w, vecs, tol, parity_plane, cluster_tol)
            except NoConvergence:
                if rel == 0.0:
                    raise
    return _sorted_pairs(op, w, vecs, tol, parity_plane, cluster_tol)


def lowest_k(
    op: SparseOperator,
    k: int,
    tol: float | None = None,
    parity_plane: float | None = None,
    cluster_tol: float = 1e-9,
) -> list[EigenPair]:
    """The ``k`` algebraically smallest eigenpairs, ascending.

    The shift sits one unit below the Gershgorin lower bound, so the
    eigenvalues nearest to it are the lowest ones.
    """
    lo, _ = op.gershgorin_bounds()
    return eigenpairs_near(op, lo - 1.0, k, tol, parity_plane, cluster_tol)


def _energy(p) -> float:
    return float(p.energy) if hasattr(p, "energy") else float(p)


def detect_degeneracy(pairs: Iterable, split_tol: float = 1e-9) -> list[SpectralGap]:
    """Gap of each bound level to the rest of the spectrum.

    The rest of the spectrum is the other computed bound energies together
    with the edge 0 of the essential spectrum.
    """
    energies = [_energy(p) for p in pairs]
    bound = [e for e in energies if e < 0]
    gaps = []
    for j, e in enumerate(bound, start=1):
        others = [abs(f - e) for i, f in enumerate(bound, start=1) if i != j]
        nearest = min(others) if others else math.inf
        gaps.append(SpectralGap(j, min(nearest, abs(e)), nearest < split_tol))
    return gaps


def orthonormal_basis(basis: Sequence[GridFunction], cond_max: float = 1e12) -> np.ndarray:
    """Euclidean-orthonormal columns spanning ``basis``."""
    cols = np.column_stack([b.flat for b in basis])
    gram = cols.T @ cols
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > cond_max:
        raise DegenerateBasis(f"Gram matrix condition number {cond:.3e} exceeds {cond_max:.0e}")
    q, _ = np.linalg.qr(cols)
    return q


def min_singular_on_complement(
    op: SparseOperator,
    basis: Sequence[GridFunction],
    tol: float = 1e-10,
    max_restarts: int = 300,
) -> float:
    """Smallest singular value of ``A`` compressed to ``span(basis)^perp``.

    The compression's inverse is applied through one sparse LU of the
    bordered matrix ``[[A, Q], [Q^T, 0]]``; Lanczos on that inverse then
    finds its largest eigenvalue, i.e. inverse iteration on the deflated
    operator.
    """
    n = op.dimension
    q = orthonormal_basis(basis) if len(basis) else np.zeros((n, 0))
    m = q.shape[1]
    if n <= DENSE_LIMIT:
        a = op.matrix.toarray()
        z = sla.null_space(q.T) if m else np.eye(n)
        w = np.linalg.eigvalsh(z.T @ a @ z)
        return float(np.min(np.abs(w)))

    bordered = sps.bmat([[op.matrix, sps.csr_matrix(q)], [sps.csr_matrix(q.T), None]], format="csc")
    try:
        # dense border columns defeat minimum degree; keep the column ordering
        lu = spla.splu(bordered)
    except RuntimeError:
        return 0.0

    def project(y):
        return y - q @ (q.T @ y) if m else y

    def solve(y):
        rhs = np.concatenate([project(np.asarray(y).ravel()), np.zeros(m)])
        return lu.solve(rhs)[:n]

    inv = spla.LinearOperator((n, n), matvec=solve, dtype=float)
    try:
        w = spla.eigsh(
            inv, k=1, which="LM", v0=project(_start_vector(n)), tol=tol, maxiter=max_restarts,
            return_eigenvectors=False,
        )
    except spla.ArpackNoConvergence as exc:
        raise NoConvergence(max_restarts) from exc
    big = abs(float(w[0]))
    return 0.0 if not np.isfinite(big) else 1.0 / big
