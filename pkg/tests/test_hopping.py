from __future__ import annotations

import math

import numpy as np
import pytest

from doublewell.eigensolve import EigenPair, Parity
from doublewell.errors import (
    MisalignedTranslation,
    NoDefiniteParity,
    PlaneInsideSupport,
    SeparationTooSmall,
    SignChangeInWindow,
    TailTooShort,
)
from doublewell.grid_ops import Grid, GridFunction, discrete_laplacian
from doublewell.hopping import (
    HoppingResult,
    compute_hopping,
    extract_tail_amplitudes_1d,
    max_pairwise_relative_deviation,
    rho_from_tails,
    rho_surface,
    rho_symmetric,
    rho_volume,
)


def _exp_pair(kappa=1.5, h=0.01, half=1500):
    g = Grid(nu=1, h=h, lo=(-half,), n=(2 * half + 1,))
    return EigenPair(-kappa**2, GridFunction(g, np.exp(-kappa * np.abs(g.axis(0)))), 0.0, Parity.EVEN)


def test_volume_sign_and_agreement(well_1d):
    _, sw = well_1d
    phi = sw.bound[0]
    rv = rho_volume(phi, sw.potential, 6.0)
    rs = rho_surface(phi, 6.0, a=1.0)
    sym = rho_symmetric(phi, 6.0)
    assert rv < 0
    # discrete Green identity: surface and volume agree to rounding
    assert rs == pytest.approx(rv, rel=1e-9)
    assert sym == pytest.approx(rv, rel=5 * 0.01**2)


def test_excited_state_formulas(well_1d):
    _, sw = well_1d
    phi = sw.bound[1]
    rv = rho_volume(phi, sw.potential, 6.0)
    assert rv > 0  # odd state: the sign flips
    assert rho_symmetric(phi, 6.0) == pytest.approx(rv, rel=5 * 0.01**2)


def test_volume_zero_separation_identity(well_1d):
    grid, sw = well_1d
    phi = sw.bound[0]
    kinetic = phi.vector.inner(
        GridFunction(sw.grid, discrete_laplacian(sw.grid).matrix @ phi.vector.flat)
    )
    got = rho_volume(phi, sw.potential, 0.0, allow_overlap=True)
    assert got == pytest.approx(phi.energy - kinetic, rel=1e-10)


def test_volume_underflows_far_apart(well_1d):
    _, sw = well_1d
    phi = sw.bound[0]
    # kappa d > 40
    assert abs(rho_volume(phi, sw.potential, 24.0)) < 1e-15


def test_volume_errors(well_1d):
    _, sw = well_1d
    with pytest.raises(SeparationTooSmall):
        rho_volume(sw.bound[0], sw.potential, 2.0)
    with pytest.raises(MisalignedTranslation):
        rho_volume(sw.bound[0], sw.potential, 6.003)


def test_surface_plane_invariance(well_1d):
    _, sw = well_1d
    phi = sw.bound[0]
    ref = rho_surface(phi, 6.0, a=1.0)
    for c in np.arange(1.03, 4.98, 0.25):
        assert rho_surface(phi, 6.0, float(np.round(c, 2)), a=1.0) == pytest.approx(ref, rel=5 * 0.01**2)
    with pytest.raises(PlaneInsideSupport):
        rho_surface(phi, 6.0, 0.9, a=1.0)
    with pytest.raises(PlaneInsideSupport):
        rho_surface(phi, 6.0, 5.0, a=1.0)


def test_surface_analytic_tail():
    kappa, d, h = 1.5, 6.0, 0.001
    phi = _exp_pair(kappa, h, 15000)
    got = rho_surface(phi, d)
    assert got == pytest.approx(-2 * kappa * math.exp(-kappa * d), rel=(kappa * h) ** 2)


def test_symmetric_analytic_tail():
    kappa, d, h = 1.5, 6.0, 0.001
    phi = _exp_pair(kappa, h, 15000)
    got = rho_symmetric(phi, d)
    assert got == pytest.approx(-2 * kappa * math.exp(-kappa * d), rel=(kappa * h) ** 2)


def test_symmetric_needs_parity():
    phi = _exp_pair()
    phi.parity = Parity.NONE
    with pytest.raises(NoDefiniteParity):
        rho_symmetric(phi, 6.0)


def test_tail_amplitudes_even_and_odd(well_1d):
    _, sw = well_1d
    even = extract_tail_amplitudes_1d(sw.bound[0], 1.0)
    odd = extract_tail_amplitudes_1d(sw.bound[1], 1.0)
    assert even.A_plus == pytest.approx(even.A_minus, rel=1e-6)
    assert odd.A_plus == pytest.approx(-odd.A_minus, rel=1e-6)
    for tail, phi in ((even, sw.bound[0]), (odd, sw.bound[1])):
        rv = rho_volume(phi, sw.potential, 6.0)
        exact = rho_from_tails(tail, 6.0)
        assert abs(exact - rv) / abs(rv) <= 2 * tail.fit_residual + 5 * 0.01**2


def test_tail_box_too_short():
    g = Grid(nu=1, h=0.01, lo=(-300,), n=(601,))
    phi = EigenPair(-1.0, GridFunction(g, np.exp(-np.abs(g.axis(0)))), 0.0)
    with pytest.raises(TailTooShort):
        extract_tail_amplitudes_1d(phi, 1.0)


def test_tail_sign_change_in_window():
    g = Grid(nu=1, h=0.01, lo=(-3000,), n=(6001,))
    x = g.axis(0)
    # decays like e^{-2|x|} but reports kappa = 0.5, so the fit window [5, 17]
    # reaches a sign flip at |x| = 10 that is too small for the node scan
    vals = np.exp(-2 * np.abs(x)) * np.where(np.abs(x) > 10.0, -1.0, 1.0)
    phi = EigenPair(-0.25, GridFunction(g, vals), 0.0)
    with pytest.raises(SignChangeInWindow):
        extract_tail_amplitudes_1d(phi, 1.0)


def test_compute_hopping_row(well_1d):
    _, sw = well_1d
    res = compute_hopping(1, sw.bound[0], sw.potential, 6.0, 1.0, True)
    row = res.row()
    assert list(row) == list(HoppingResult.CSV_FIELDS)
    assert row["plane_c"] == 3.0
    assert res.tail is not None and res.tail.kappa > 0
    assert res.max_relative_deviation() < 1e-3


def test_pairwise_deviation():
    assert max_pairwise_relative_deviation([1.0, 1.0, 1.0]) == 0.0
    assert max_pairwise_relative_deviation([1.0, 0.9, 1.05]) == pytest.approx(0.15 / 1.05)
