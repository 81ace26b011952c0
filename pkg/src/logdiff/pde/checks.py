"""Distances, rescaling and inequality checks on simulated trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from ..profiles import RadialProfile, eval_profile
from .grid import RadialGrid, State, uniform_grid
from .solver import BoundaryCondition, Trajectory

ORDERING_TOL_REL = 1e-8


def interpolate_state(state: State, r) -> np.ndarray:
    """Monotone cubic interpolation of a state in (log(1+r), log u)."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r > state.grid.R_dom * (1 + 1e-12)):
        raise ValueError("interpolation radius outside the grid")
    x = np.log1p(state.grid.radii)
    f = PchipInterpolator(x, np.log(state.u))
    out = np.exp(f(np.log1p(np.minimum(r, state.grid.R_dom))))
    # identity on shared nodes
    idx = np.clip(np.searchsorted(state.grid.radii, r), 0, state.grid.size - 1)
    return np.where(state.grid.radii[idx] == r, state.u[idx], out)


def rescale_state(state: State, beta: float, target_grid: RadialGrid) -> State:
    """ũ(y) = exp(2βt) u(exp(βt) y) sampled on ``target_grid``.

    Raises ``ValueError`` when the target grid reaches past the shrunken
    window R_dom·exp(-βt).
    """
    stretch = math.exp(beta * state.t)
    usable = state.grid.R_dom / stretch
    if target_grid.R_dom > usable * (1 + 1e-12):
        raise ValueError(
            f"target grid radius {target_grid.R_dom:g} exceeds usable rescaled radius {usable:g}"
        )
    u = stretch**2 * interpolate_state(state, np.minimum(stretch * target_grid.radii,
                                                          state.grid.R_dom))
    return State(target_grid, state.t, u, {"rescaled": True, "beta": beta})


def l1_distance(a: State | np.ndarray, b: State | np.ndarray, R: float | None = None,
                grid: RadialGrid | None = None) -> float:
    """ω_n ∫₀^R r^{n-1}|a - b| dr by shell-measure quadrature.

    Either argument may be a bare array sampled on the other's grid.
    """
    grid = grid or (a.grid if isinstance(a, State) else b.grid)
    if isinstance(a, State) and isinstance(b, State) and not a.grid.same_as(b.grid):
        raise ValueError("states live on different grids")
    ua = a.u if isinstance(a, State) else np.asarray(a, dtype=float)
    ub = b.u if isinstance(b, State) else np.asarray(b, dtype=float)
    if ua.shape != grid.radii.shape or ub.shape != grid.radii.shape:
        raise ValueError("sample arrays do not match the grid")
    R = grid.R_dom if R is None else R
    if R > grid.R_dom * (1 + 1e-12):
        raise ValueError("R exceeds the grid radius")
    return float(np.dot(grid.restrict(R), np.abs(ua - ub)))


@dataclass
class ErrorReport:
    times: np.ndarray
    linf_rel: np.ndarray
    l1_rel: np.ndarray
    r_max: float

    @property
    def max_linf(self) -> float:
        return float(np.max(self.linf_rel))


def residual_exact(traj: Trajectory, oracle: BoundaryCondition,
                   r_max: float | None = None) -> ErrorReport:
    """Per-snapshot relative errors against an exact solution on r ≤ r_max
    (default: the inner half of the domain)."""
    if not oracle.is_exact:
        raise ValueError("oracle must be an exact solution")
    grid = traj.grid
    r_max = 0.5 * grid.R_dom if r_max is None else r_max
    mask = grid.radii <= r_max * (1 + 1e-12)
    w = grid.restrict(r_max)
    linf, l1 = [], []
    for s in traj.snapshots:
        exact = oracle.exact(grid.radii, s.t)
        err = np.abs(s.u - exact)
        linf.append(float(np.max(err[mask] / exact[mask])))
        l1.append(float(np.dot(w, err) / np.dot(w, exact)))
    return ErrorReport(traj.times, np.array(linf), np.array(l1), r_max)


@dataclass
class CheckReport:
    name: str
    passed: bool
    worst: float
    tolerance: float
    detail: dict

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "worst": self.worst,
                "tolerance": self.tolerance, **self.detail}


def comparison_check(traj_a: Trajectory, traj_b: Trajectory,
                     ordering_tol: float | None = None) -> CheckReport:
    """Maximum ordering violation max(a - b)₊ over all snapshots and nodes.

    Default tolerance is 1e-8·max(u).
    """
    if len(traj_a.snapshots) != len(traj_b.snapshots) or not np.allclose(
        traj_a.times, traj_b.times, rtol=0, atol=1e-12
    ):
        raise ValueError("trajectories have different snapshot times")
    if not traj_a.grid.same_as(traj_b.grid):
        raise ValueError("trajectories live on different grids")
    a0, b0 = traj_a.snapshots[0].u, traj_b.snapshots[0].u
    if np.any(a0 > b0):
        raise ValueError("initial data are not ordered a0 <= b0")
    umax = max(float(np.max(s.u)) for s in traj_b.snapshots)
    tol = ORDERING_TOL_REL * umax if ordering_tol is None else ordering_tol
    worst, t_worst = 0.0, 0.0
    for sa, sb in zip(traj_a.snapshots, traj_b.snapshots):
        v = float(np.max(sa.u - sb.u))
        if v > worst:
            worst, t_worst = v, sa.t
    return CheckReport("comparison", worst <= tol, worst, tol, {"t_worst": t_worst})


def comparison_with_exact(traj: Trajectory, oracle: BoundaryCondition,
                          ordering_tol: float | None = None) -> CheckReport:
    """max(u - φ)₊ against an exact supersolution sampled on the same grid."""
    worst, t_worst = 0.0, 0.0
    umax = 0.0
    for s in traj.snapshots:
        exact = oracle.exact(s.grid.radii, s.t)
        umax = max(umax, float(np.max(exact)))
        v = float(np.max(s.u - exact))
        if v > worst:
            worst, t_worst = v, s.t
    tol = ORDERING_TOL_REL * umax if ordering_tol is None else ordering_tol
    return CheckReport("comparison_exact", worst <= tol, worst, tol, {"t_worst": t_worst})


def aronson_benilan_check(traj: Trajectory, ab_tol_rel: float = 1e-6,
                          t_min: float = 0.0) -> CheckReport:
    """Discrete u_t ≤ u/t between consecutive snapshots with t > t_min.

    Checks (u(t₂) - u(t₁))/(t₂ - t₁) ≤ u(t₁)/t₁ + ab_tol with
    ab_tol = ab_tol_rel·max(u(t₁))/t₁ at every node.  ``worst`` is the
    largest violation margin (negative means slack everywhere).
    """
    snaps = [s for s in traj.snapshots if s.t > t_min]
    if len(snaps) < 3:
        raise ValueError("need at least 3 snapshots at t > 0")
    worst = -math.inf
    worst_rel = -math.inf
    for s1, s2 in zip(snaps, snaps[1:]):
        rate = (s2.u - s1.u) / (s2.t - s1.t)
        bound = s1.u / s1.t
        tol = ab_tol_rel * float(np.max(s1.u)) / s1.t
        margin = rate - bound
        worst = max(worst, float(np.max(margin)))
        worst_rel = max(worst_rel, float(np.max(margin)) / tol)
    return CheckReport("aronson_benilan", worst_rel <= 1.0, worst, ab_tol_rel,
                       {"worst_over_tol": worst_rel, "snapshots": len(snaps)})


def profile_on(grid: RadialGrid, profile: RadialProfile) -> np.ndarray:
    return eval_profile(profile, np.minimum(grid.radii, profile.r_max))[0]


def rescaled_window(state: State, beta: float, target: RadialGrid | None = None,
                    size: int = 401) -> State:
    """Rescale onto ``target`` or a uniform grid filling the whole window."""
    if target is None:
        R = state.grid.R_dom * math.exp(-beta * state.t)
        target = uniform_grid(R, state.grid.n, size)
    return rescale_state(state, beta, target)


def rescaled_residual(traj: Trajectory, beta: float, R: float, size: int = 201) -> np.ndarray:
    """Residual of ũ_t = Δ log ũ + 2βũ + β y ũ_y between adjacent snapshots.

    Both snapshots are rescaled onto a uniform grid on [0, R]; the time
    derivative is the difference quotient and the spatial terms are averaged
    over the two snapshots (centred in time).  Returns the max-norm of the
    residual for each snapshot pair.
    """
    n = traj.grid.n
    target = uniform_grid(R, n, size)
    y = target.radii
    h = y[1] - y[0]

    def spatial(u):
        v = np.log(u)
        lap = np.empty_like(v)
        lap[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / h**2 + (n - 1) / y[1:-1] * (
            v[2:] - v[:-2]) / (2 * h)
        lap[0] = 2 * n * (v[1] - v[0]) / h**2
        du = np.empty_like(u)
        du[1:-1] = (u[2:] - u[:-2]) / (2 * h)
        du[0] = 0.0
        out = lap + 2 * beta * u + beta * y * du
        return out[:-1]

    res = []
    for s1, s2 in zip(traj.snapshots, traj.snapshots[1:]):
        a = rescale_state(s1, beta, target).u
        b = rescale_state(s2, beta, target).u
        ut = (b - a)[:-1] / (s2.t - s1.t)
        res.append(float(np.max(np.abs(ut - 0.5 * (spatial(a) + spatial(b))))))
    return np.array(res)


def envelope_bracket(state: State, beta: float, r_lo: float = 3.0,
                     r_hi: float | None = None, size: int = 200) -> dict:
    """Spread of ũ(y)(1+|y|²)/log|y| over r_lo ≤ |y| ≤ r_hi.

    Returns the bracket constants c = min and C = max of that ratio.
    """
    usable = state.grid.R_dom * math.exp(-beta * state.t)
    r_hi = 0.5 * usable if r_hi is None else r_hi
    if r_hi > usable:
        raise ValueError(f"r_hi={r_hi:g} exceeds usable rescaled radius {usable:g}")
    y = np.geomspace(r_lo, r_hi, size)
    stretch = math.exp(beta * state.t)
    ut = stretch**2 * interpolate_state(state, stretch * y)
    ratio = ut * (1 + y**2) / np.log(y)
    return {"c": float(ratio.min()), "C": float(ratio.max()),
            "spread": float(ratio.max() / ratio.min()), "r_lo": r_lo, "r_hi": r_hi}


def decay_sequence(traj: Trajectory, reference: Trajectory | None, profile: RadialProfile,
                   beta: float) -> dict:
    """D(t) = ‖ũ(t) - ψ‖ over the retained window |y| ≤ R_dom·exp(-βt).

    By the change of variables y = exp(-βt) x this equals
    exp(-(n-2)βt)·‖u(t) - φ(t)‖ over the full truncated ball, which is how it
    is evaluated (no interpolation).  φ is either the exact self-similar
    solution (``reference=None``) or a discrete run started from ψ with the
    same boundary data.  The interpolated route through :func:`rescale_state`
    against the exact ψ is returned alongside as ``D_interp``.
    """
    n = traj.grid.n
    out = {"t": [], "D": [], "D_interp": []}
    for i, s in enumerate(traj.snapshots):
        if reference is None:
            phi = np.exp(-2 * beta * s.t) * profile_on_scaled(s.grid, profile, beta, s.t)
        else:
            phi = reference.snapshots[i].u
            if not math.isclose(reference.snapshots[i].t, s.t, abs_tol=1e-12):
                raise ValueError("reference snapshots are out of step")
        D = math.exp(-(n - 2) * beta * s.t) * l1_distance(s.u, phi, grid=s.grid)
        tilde = rescaled_window(s, beta, size=2001)
        D_interp = l1_distance(tilde.u, profile_on(tilde.grid, profile), grid=tilde.grid)
        out["t"].append(s.t)
        out["D"].append(D)
        out["D_interp"].append(D_interp)
    return {k: np.array(v) for k, v in out.items()}


def profile_on_scaled(grid: RadialGrid, profile: RadialProfile, beta: float, t: float):
    return eval_profile(profile, np.exp(-beta * t) * grid.radii)[0]


def rescaled_nodes(state: State, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """The retained nodes in rescaled coordinates, y_i = exp(-βt) r_i, with
    ũ(y_i) = exp(2βt) u_i (exact, no interpolation)."""
    y = np.exp(-beta * state.t) * state.grid.radii
    return y, np.exp(2 * beta * state.t) * state.u


def sup_distance(state: State, profile: RadialProfile, beta: float, radius: float) -> float:
    """max over retained nodes with |y| ≤ radius of |ũ(y, t) - ψ(y)|."""
    y, ut = rescaled_nodes(state, beta)
    keep = y <= radius * (1 + 1e-12)
    if y[-1] < radius * (1 - 1e-12):
        raise ValueError(f"retained window {y[-1]:g} is smaller than radius {radius:g}")
    return float(np.max(np.abs(ut[keep] - eval_profile(profile, y[keep])[0])))


def sandwich_check(traj: Trajectory, beta: float, lower: RadialProfile, upper: RadialProfile,
                   slack: float = 1e-8, t_max: float | None = None) -> CheckReport:
    """ψ_lower - slack ≤ ũ(·, t) ≤ ψ_upper + slack at every retained node."""
    worst_low = worst_high = -math.inf
    for s in traj.snapshots:
        if t_max is not None and s.t > t_max + 1e-12:
            continue
        y, ut = rescaled_nodes(s, beta)
        lo = eval_profile(lower, np.minimum(y, lower.r_max))[0]
        hi = eval_profile(upper, np.minimum(y, upper.r_max))[0]
        worst_low = max(worst_low, float(np.max(lo - ut)))
        worst_high = max(worst_high, float(np.max(ut - hi)))
    worst = max(worst_low, worst_high)
    return CheckReport("sandwich", worst <= slack, worst, slack,
                       {"below_lower": worst_low, "above_upper": worst_high})
