import math

import numpy as np
import pytest

from logdiff.pde import RadialGrid, State, build_grid, uniform_grid
from logdiff.radial import ball_volume


def test_node_count_small_grid():
    # 11 uniform nodes on [0, 1] (origin included) plus 32 per decade on (1, 10]
    g = build_grid(10.0, 3, 0.1, 32)
    assert g.size == 43
    assert g.radii[0] == 0.0
    assert g.R_dom == 10.0


@pytest.mark.parametrize("n", [3, 4, 5])
@pytest.mark.parametrize("R, h, npd", [(100.0, 0.05, 32), (7.3, 0.013, 50), (400.0, 0.1, 16)])
def test_measures_sum_to_ball(n, R, h, npd):
    g = build_grid(R, n, h, npd)
    assert np.all(g.measures > 0)
    assert g.measures.sum() == pytest.approx(ball_volume(R, n), rel=1e-12)
    assert np.all(np.diff(g.radii) > 0)


def test_face_coefficients():
    g = uniform_grid(1.0, 3, 5)
    mid = np.array([0.125, 0.375, 0.625, 0.875])
    np.testing.assert_allclose(g.face_coeff, 4 * math.pi * mid**2 / 0.25, rtol=1e-14)


def test_restrict_clips_cells():
    g = uniform_grid(2.0, 3, 5)
    w = g.restrict(1.0)
    assert w.sum() == pytest.approx(ball_volume(1.0, 3), rel=1e-14)
    assert np.all(w[3:] == 0)
    assert g.restrict(2.0).sum() == pytest.approx(g.measures.sum(), rel=1e-14)


@pytest.mark.parametrize("args", [(1.0, 3, 0.1, 32), (10.0, 3, 0.0, 32), (10.0, 3, 0.1, 0),
                                  (1.5, 3, 0.5, 2)])
def test_build_grid_rejects(args):
    with pytest.raises(ValueError):
        build_grid(*args)


def test_grid_rejects_bad_radii():
    with pytest.raises(ValueError):
        RadialGrid(np.array([0.1, 0.2, 0.3]), 3)
    with pytest.raises(ValueError):
        RadialGrid(np.array([0.0, 0.2, 0.2]), 3)


def test_grid_is_read_only():
    g = build_grid(10.0, 3, 0.1, 32)
    with pytest.raises(ValueError):
        g.radii[1] = 5.0


def test_state_invariants():
    g = uniform_grid(1.0, 3, 4)
    State(g, 0.0, np.ones(4))
    for bad in (np.array([1.0, 0.0, 1.0, 1.0]), np.array([1.0, np.nan, 1.0, 1.0]), np.ones(3)):
        with pytest.raises(ValueError):
            State(g, 0.0, bad)
    with pytest.raises(ValueError):
        State(g, -1.0, np.ones(4))
    s = State(g, 0.5, np.ones(4))
    with pytest.raises(ValueError):
        s.u[0] = 2.0


def test_same_as():
    a = build_grid(10.0, 3, 0.1, 32)
    b = build_grid(10.0, 3, 0.1, 32)
    c = build_grid(10.0, 4, 0.1, 32)
    assert a.same_as(b) and not a.same_as(c)
