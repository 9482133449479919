from __future__ import annotations

import math

import numpy as np
import pytest

from doublewell.eigensolve import Parity, eigenpairs_near
from doublewell.errors import OverlapTooLarge, WrongClusterSize
from doublewell.grid_ops import assemble_hamiltonian, build_grid
from doublewell.hopping import rho_volume
from doublewell.potential import DoubleWellConfig, assemble_double_well
from doublewell.splitting import (
    corrections_report,
    double_well_levels,
    generalized_split,
    pair_on_grid,
    principal_cosines,
    two_level_matrix,
)
from doublewell.sweep import solve_single_well

from oracles import KAPPA2_1D


@pytest.fixture(scope="module")
def setups(square_spec):
    out = {}
    for d in (6.0, 8.0):
        grid = build_grid(1, d, KAPPA2_1D, 0.01, square_spec.a)
        sw = solve_single_well(square_spec, grid.single_well_grid(), 3)
        H = assemble_hamiltonian(grid, assemble_double_well(DoubleWellConfig(square_spec, d), grid))
        out[d] = (grid, sw, H)
    return out


def test_ground_pair_parities_and_ratio(setups):
    grid, sw, H = setups[6.0]
    phi = sw.bound[0]
    rho = rho_volume(phi, sw.potential, 6.0)
    res = double_well_levels(H, phi, 6.0, sw.gaps[0].gamma, 1, rho)
    assert res.Delta >= 0 and res.E_minus <= res.E_plus
    assert (res.parity_minus, res.parity_plus) == (Parity.EVEN, Parity.ODD)
    assert abs(res.ratio - 1) < 0.1
    assert res.pairing_score >= 0.9


def test_excited_pair_ordering_flips(setups):
    _, sw, H = setups[6.0]
    phi = sw.bound[1]
    rho = rho_volume(phi, sw.potential, 6.0)
    res = double_well_levels(H, phi, 6.0, sw.gaps[1].gamma, 2, rho)
    assert rho > 0
    # rho > 0 puts the difference phi - R^d phi lowest; for an odd phi that
    # combination is even about d/2, so the labels match the ground pair
    assert (res.parity_minus, res.parity_plus) == (Parity.EVEN, Parity.ODD)
    f0, fd = pair_on_grid(phi, 6.0, H.grid)
    lower = eigenpairs_near(H, res.E_minus, 1)[0].vector
    assert abs(lower.inner(f0) + lower.inner(fd)) < 1e-6 * abs(lower.inner(f0))


def test_splitting_shrinks_with_d(setups):
    deltas = []
    for d in (6.0, 8.0):
        _, sw, H = setups[d]
        deltas.append(double_well_levels(H, sw.bound[0], d, sw.gaps[0].gamma).Delta)
    assert deltas[1] < deltas[0]


def test_wrong_cluster_size(setups):
    _, sw, H = setups[6.0]
    # a window this wide takes in all four bound levels and more
    with pytest.raises(WrongClusterSize) as info:
        double_well_levels(H, sw.bound[0], 6.0, 6.0)
    assert info.value.n > 2


def test_two_level_matrix_structure(setups):
    _, sw, H = setups[8.0]
    phi = sw.bound[0]
    model = two_level_matrix(phi, H, 8.0)
    M, S = model.M, model.S
    assert M[0, 0] == pytest.approx(M[1, 1], rel=1e-10)
    assert M[0, 1] == M[1, 0]
    assert np.all(np.linalg.eigvalsh(S) > 0)
    np.testing.assert_allclose(np.diag(S), 1.0, atol=1e-12)
    assert abs(model.overlap) < 1


def test_two_level_tends_to_hopping_and_splitting(setups):
    errs, preds = [], []
    for d in (6.0, 8.0):
        _, sw, H = setups[d]
        phi = sw.bound[0]
        rho = rho_volume(phi, sw.potential, d)
        model = two_level_matrix(phi, H, d)
        errs.append(abs(model.M[0, 1] - rho) / abs(rho))
        delta = double_well_levels(H, phi, d, sw.gaps[0].gamma).Delta
        preds.append(abs(model.predicted_split / delta - 1))
    # the off-diagonal element equals rho up to rounding on a shared grid
    assert max(errs) < 1e-9
    assert preds[1] < preds[0] < 1e-3


def test_overlap_too_large():
    S = np.array([[1.0, 0.995], [0.995, 1.0]])
    assert generalized_split(np.eye(2), S) > 0
    from doublewell.grid_ops import Grid, GridFunction, SparseOperator
    import scipy.sparse as sps
    from doublewell.eigensolve import EigenPair

    g = Grid(nu=1, h=0.01, lo=(-500,), n=(1001,))
    wide = EigenPair(-1e-4, GridFunction(g, np.exp(-1e-3 * g.axis(0) ** 2)), 0.0)
    with pytest.raises(OverlapTooLarge):
        two_level_matrix(wide, SparseOperator(g, sps.identity(g.size, format="csr")), 0.02)


def test_generalized_split_closed_form():
    M = np.array([[0.1, -0.3], [-0.3, 0.1]])
    assert generalized_split(M, np.eye(2)) == pytest.approx(0.6)
    S = np.array([[1.0, 0.2], [0.2, 1.0]])
    w = np.linalg.eigvals(np.linalg.solve(S, M)).real
    assert generalized_split(M, S) == pytest.approx(abs(w[0] - w[1]))


def test_principal_cosines_identity(setups):
    _, sw, _ = setups[6.0]
    v = [sw.pairs[0].vector, sw.pairs[1].vector]
    np.testing.assert_allclose(principal_cosines(v, v), 1.0, atol=1e-12)


def test_corrections_shrink(setups):
    reports = []
    for d in (6.0, 8.0):
        _, sw, H = setups[d]
        phi = sw.bound[0]
        rho = rho_volume(phi, sw.potential, d)
        reports.append(corrections_report(phi, sw.potential, d, rho, H))
    for name in ("r1", "r2", "r3"):
        assert getattr(reports[1], name) < getattr(reports[0], name) / 2
    kappa = math.sqrt(-setups[6.0][1].bound[0].energy)
    ratio = reports[1].diagonal_shift / reports[0].diagonal_shift
    assert ratio == pytest.approx(math.exp(-2 * kappa * 2.0), rel=0.05)
