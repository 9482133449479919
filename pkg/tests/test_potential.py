from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from doublewell.errors import BoxTooSmall, MisalignedPlane, SeparationTooSmall
from doublewell.grid_ops import Grid, GridFunction, build_grid
from doublewell.potential import (
    DoubleWellConfig,
    PotentialSpec,
    Shape,
    assemble_double_well,
    eval_single_well,
    reflect,
)


def test_square_well_values():
    spec = PotentialSpec(Shape.SQUARE_WELL, 1.0, 4.0)
    assert eval_single_well(spec, 0.5) == -1.0
    assert eval_single_well(spec, 2.0) == 0.0
    assert eval_single_well(spec, [0.0, 0.5]) == -1.0


def test_smooth_bump_edge_is_flat():
    spec = PotentialSpec(Shape.SMOOTH_BUMP, 1.0, 1.0)
    assert eval_single_well(spec, 1.0) == 0.0
    assert eval_single_well(spec, 0.0) == pytest.approx(-1.0)
    eps = 1e-3
    slope = (eval_single_well(spec, 1.0) - eval_single_well(spec, 1.0 - eps)) / eps
    assert abs(slope) < 1e-100


def test_smooth_bump_second_differences_converge():
    spec = PotentialSpec(Shape.SMOOTH_BUMP, 1.0, 1.0)
    x = 0.4
    vals = []
    for eps in (1e-2, 5e-3, 2.5e-3):
        f = [eval_single_well(spec, x + s * eps) for s in (-1, 0, 1)]
        vals.append((f[0] - 2 * f[1] + f[2]) / eps**2)
    # second-order convergence of the difference quotient
    assert abs(vals[1] - vals[2]) < 0.3 * abs(vals[0] - vals[1])


def test_tabulated_clamps_beyond_support():
    spec = PotentialSpec(Shape.TABULATED_RADIAL, 1.0, 2.0, table_r=(0.0, 0.5, 1.0), table_v=(-1.0, -0.5, 0.0))
    assert eval_single_well(spec, 0.25) == pytest.approx(-0.75)
    assert eval_single_well(spec, 1.5) == 0.0


@given(r=st.floats(1.0001, 50.0), shape=st.sampled_from(list(Shape)))
def test_compact_support(r, shape):
    spec = PotentialSpec(shape, 1.0, 3.0, table_r=(0.0, 2.0), table_v=(-1.0, -1.0))
    assert eval_single_well(spec, r) == 0.0
    assert eval_single_well(spec, [0.0, -r]) == 0.0


def test_spec_round_trip():
    spec = PotentialSpec(Shape.TABULATED_RADIAL, 1.5, 2.0, False, (0.0, 1.5), (-2.0, 0.0))
    assert PotentialSpec.from_dict(spec.to_dict()) == spec


def test_double_well_samples():
    spec = PotentialSpec(Shape.SQUARE_WELL, 1.0, 4.0)
    grid = build_grid(1, 6.0, 1.5, 0.01)
    pot = assemble_double_well(DoubleWellConfig(spec, 6.0), grid)
    at = lambda x: pot.values[grid.node_index(x)]
    assert at(0.0) == -4.0
    assert at(6.0) == -4.0
    assert at(3.0) == 0.0


def test_double_well_2d_center():
    spec = PotentialSpec(Shape.SQUARE_WELL, 1.0, 4.0)
    grid = build_grid(2, 6.0, 3.0, 0.1)
    pot = assemble_double_well(DoubleWellConfig(spec, 6.0), grid)
    j0 = grid.node_index(0.0, 1)
    assert pot.values[grid.node_index(6.0), j0] == -4.0
    assert pot.values[grid.node_index(3.0), j0] == 0.0


def test_separation_too_small():
    spec = PotentialSpec(Shape.SQUARE_WELL, 1.0, 4.0)
    with pytest.raises(SeparationTooSmall):
        DoubleWellConfig(spec, 2.0)


def test_box_too_small():
    spec = PotentialSpec(Shape.SQUARE_WELL, 1.0, 4.0)
    tiny = Grid(nu=1, h=0.1, lo=(-10,), n=(71,), d=6.0)
    with pytest.raises(BoxTooSmall):
        assemble_double_well(DoubleWellConfig(spec, 6.0), tiny)


def test_reflect_spike():
    grid = Grid(nu=1, h=0.5, lo=(-4,), n=(25,))
    v = np.zeros(25)
    v[grid.node_index(0.0)] = 1.0
    out = reflect(GridFunction(grid, v), 3.0)
    assert out.values[grid.node_index(6.0)] == 1.0
    assert out.values.sum() == 1.0


def test_reflect_misaligned():
    grid = Grid(nu=1, h=0.5, lo=(-4,), n=(25,))
    with pytest.raises(MisalignedPlane):
        reflect(GridFunction(grid, np.ones(25)), 0.1)


@settings(max_examples=30)
@given(half=st.integers(-10, 10), seed=st.integers(0, 2**31 - 1))
def test_reflect_involution_isometry(half, seed):
    # 41 nodes starting at index lo are symmetric about the midpoint c
    h = 0.25
    lo = -20 + half
    grid = Grid(nu=2, h=h, lo=(lo, -3), n=(41, 7))
    c = (2 * lo + 40) * h / 2
    f = GridFunction(grid, np.random.default_rng(seed).normal(size=grid.shape))
    uf = reflect(f, c)
    assert np.array_equal(reflect(uf, c).values, f.values)
    assert uf.norm() == pytest.approx(f.norm(), rel=1e-14)


def test_double_well_reflection_symmetric():
    spec = PotentialSpec(Shape.SMOOTH_BUMP, 1.0, 4.0)
    grid = build_grid(2, 6.0, 2.0, 0.1)
    pot = assemble_double_well(DoubleWellConfig(spec, 6.0), grid)
    assert np.array_equal(reflect(pot, 3.0).values, pot.values)
