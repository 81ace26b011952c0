import math

import numpy as np
import pytest

from logdiff import pde
from logdiff.pde import solver
from logdiff.profiles import barenblatt_eval, cached_profile


def exact_config(**kw):
    base = dict(n=3, beta=1.0, R_dom=100.0, initial=pde.InitialData("profile", lam=1.0),
                bc={"kind": "exact_self_similar", "lam": 1.0}, t_end=0.2)
    base.update(kw)
    return pde.SimConfig(**base)


@pytest.fixture(scope="module")
def grid():
    return pde.build_grid(100.0, 3, 0.05, 32)


def test_constant_state_is_stationary():
    g = pde.build_grid(20.0, 3, 0.1, 16)
    s = pde.State(g, 0.0, np.full(g.size, 2.5))
    bc = pde.BoundaryCondition.pinned(2.5)
    for _ in range(3):
        s = pde.step(s, 0.1, bc)
    np.testing.assert_allclose(s.u, 2.5, rtol=1e-14)
    assert s.t == pytest.approx(0.3)


@pytest.mark.parametrize("kind", ["self_similar", "barenblatt"])
def test_one_step_against_exact(kind):
    errs = []
    for h, npd in ((0.05, 32), (0.025, 64)):
        g = pde.build_grid(100.0, 3, h, npd)
        if kind == "self_similar":
            bc = pde.BoundaryCondition.self_similar(cached_profile(3, 1.0, 1.0, 100.0))
        else:
            bc = pde.BoundaryCondition.barenblatt(3, 1.0, 1.0)
        s0 = pde.State(g, 0.0, bc.exact(g.radii, 0.0))
        s1 = pde.step(s0, 1e-3, bc)
        exact = bc.exact(g.radii, 1e-3)
        inner = g.radii <= 50
        errs.append(np.max(np.abs(s1.u - exact)[inner] / exact[inner]))
        assert s1.meta["residual"] <= 1e-12
    assert errs[0] < 1e-4
    assert errs[1] < errs[0]


def test_step_rejects_bad_dt(grid):
    s = pde.State(grid, 0.0, np.ones(grid.size))
    with pytest.raises(ValueError):
        pde.step(s, 0.0, pde.BoundaryCondition.pinned(1.0))


def test_t_end_zero_gives_initial_state():
    traj = pde.run(exact_config(t_end=0.0))
    assert len(traj.snapshots) == 1
    assert traj.times[0] == 0.0
    assert len(traj.steps) == 0


def test_snapshots_hit_exactly():
    traj = pde.run(exact_config(t_end=0.1, dt=0.03, snapshot_times=(0.01, 0.05)))
    assert traj.times.tolist() == [0.0, 0.01, 0.05, 0.1]
    assert sum(traj.dt_sequence()) == pytest.approx(0.1, abs=1e-14)
    assert traj.at(0.05).t == 0.05
    with pytest.raises(KeyError):
        traj.at(0.02)


def test_dirichlet_node_follows_exact_data():
    traj = pde.run(exact_config(t_end=0.2, snapshot_times=(0.1,)))
    for s in traj.snapshots:
        assert s.u[-1] == pytest.approx(float(traj.bc.exact(100.0, s.t)), rel=1e-14)


def test_refinement_reduces_error():
    cfg = exact_config(t_end=0.5, inner_h=0.05, nodes_per_decade=32, dt=8e-3)
    coarse = pde.residual_exact(pde.run(cfg), cfg.boundary()).max_linf
    fine = pde.residual_exact(pde.run(cfg.refined(2)), cfg.boundary()).max_linf
    assert 1.5 <= coarse / fine <= 3.0


def test_bdf2_beats_backward_euler_in_time():
    kw = dict(t_end=0.5, inner_h=0.0125, nodes_per_decade=128, dt=0.02)
    be = pde.run(exact_config(**kw))
    bdf = pde.run(exact_config(scheme="bdf2", **kw))
    e_be = pde.residual_exact(be, be.bc).max_linf
    e_bdf = pde.residual_exact(bdf, bdf.bc).max_linf
    assert e_bdf < 0.5 * e_be


def test_newton_failure_halves_dt(monkeypatch):
    calls = {"n": 0}
    real_step = solver.step

    def flaky(*args, **kw):
        calls["n"] += 1
        if calls["n"] == 1:
            raise solver.NewtonError("forced")
        return real_step(*args, **kw)

    monkeypatch.setattr(solver, "step", flaky)
    traj = pde.run(exact_config(t_end=0.02, dt=0.01))
    dts = traj.dt_sequence()
    assert dts[0] == pytest.approx(0.005)
    assert sum(dts) == pytest.approx(0.02)


def test_dt_underflow_raises(monkeypatch):
    def always_fail(*args, **kw):
        raise solver.NewtonError("forced")

    monkeypatch.setattr(solver, "step", always_fail)
    with pytest.raises(pde.SimulationError):
        pde.run(exact_config(t_end=0.02, dt=0.01))


def test_adaptive_growth():
    traj = pde.run(exact_config(t_end=0.3, dt=1e-3, dt_max=4e-3, adaptive=True))
    dts = traj.dt_sequence()
    assert dts[:5].tolist() == [1e-3] * 5
    assert dts[5] == pytest.approx(1.2e-3)
    assert dts.max() <= 4e-3 * (1 + 1e-12)


def test_positivity_with_zero_initial_data():
    init = pde.InitialData("profile_bump", lam=1.0, amplitude=-2.0, support=2.0)
    cfg = exact_config(initial=init, t_end=0.1, snapshot_times=(0.01,))
    traj = pde.run(cfg)
    assert traj.snapshots[0].u.min() == solver.U_MIN
    for s in traj.snapshots[1:]:
        assert np.all(s.u > 0)
        assert np.all(np.isfinite(s.u))
    # the hole fills in quickly
    hole = traj.grid.radii <= 2.0
    assert traj.snapshots[-1].u[hole].min() > 0.1


def test_init_state_examples(grid):
    prof = cached_profile(3, 1.0, 1.0, 100.0)
    s = pde.init_state(grid, pde.InitialData("profile", lam=1.0))
    np.testing.assert_array_equal(s.u, prof(grid.radii))
    s = pde.init_state(grid, pde.InitialData("profile_bump", lam=1.0))
    assert s.u[0] == pytest.approx(1.5)
    assert np.all(s.u[grid.radii >= 1.0] == prof(grid.radii[grid.radii >= 1.0]))
    s = pde.init_state(grid, pde.InitialData("barenblatt", k=1.0, T=1.0))
    assert s.u[0] == pytest.approx(2.0)
    np.testing.assert_allclose(s.u, barenblatt_eval(1.0, 1.0, 3, grid.radii, 0.0))


def test_init_table_and_coverage(grid):
    r = np.linspace(0, 100, 11)
    spec = pde.InitialData("table", table_r=tuple(r), table_u=tuple(1 + r))
    s = pde.init_state(grid, spec)
    np.testing.assert_allclose(s.u, 1 + grid.radii)
    short = pde.InitialData("table", table_r=(0.0, 10.0), table_u=(1.0, 1.0))
    with pytest.raises(ValueError):
        pde.init_state(grid, short)


def test_random_center_is_seeded():
    spec = pde.InitialData("profile_bump", center="random", support=1.0)
    assert spec.bump_center(3) == spec.bump_center(3)
    assert spec.bump_center(3) != spec.bump_center(4)
    assert 0 <= spec.bump_center(3) <= 2


def test_boundary_condition_positivity():
    bc = pde.BoundaryCondition.barenblatt(3, 1.0, 1.0)
    assert bc.value(10.0, 0.5) > 0
    with pytest.raises(pde.SimulationError):
        bc.value(10.0, 1.0)
    with pytest.raises(ValueError):
        pde.BoundaryCondition("dirichlet")


def test_pinned_boundary_takes_initial_value():
    init = pde.InitialData("profile_bump", lam=1.0)
    cfg = exact_config(initial=init, bc={"kind": "pinned_initial"}, t_end=0.05)
    traj = pde.run(cfg)
    assert traj.bc.kind == "pinned_initial"
    assert traj.snapshots[-1].u[-1] == traj.snapshots[0].u[-1]


def test_config_round_trip():
    cfg = exact_config(snapshot_times=(0.1,), scheme="bdf2", seed=7)
    again = pde.SimConfig.from_dict(cfg.to_dict())
    assert again == cfg


@pytest.mark.parametrize("kw", [dict(R_dom=-1.0), dict(t_end=-1.0),
                                dict(snapshot_times=(0.5,)), dict(scheme="rk4"),
                                dict(bc={"kind": "neumann"})])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        exact_config(**kw)


def test_trajectory_times_must_increase(grid):
    s = pde.State(grid, 0.1, np.ones(grid.size))
    with pytest.raises(ValueError):
        pde.Trajectory((s, s), ())


def test_mass_change_matches_boundary_flux():
    """Discrete conservation: the change of ∑ m_i u_i over a step equals dt
    times the flux through the last face (up to the Dirichlet cell)."""
    g = pde.build_grid(30.0, 3, 0.05, 32)
    init = pde.InitialData("profile_bump", lam=1.0)
    s0 = pde.init_state(g, init)
    bc = pde.BoundaryCondition.pinned(float(s0.u[-1]))
    dt = 1e-2
    s1 = pde.step(s0, dt, bc)
    v = np.log(s1.u)
    flux_out = g.face_coeff[-1] * (v[-1] - v[-2])
    m = g.measures
    change = np.dot(m[:-1], s1.u[:-1] - s0.u[:-1])
    assert change == pytest.approx(dt * flux_out, rel=1e-9, abs=1e-12)
