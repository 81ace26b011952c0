"""Implicit finite-volume solver for u_t = Δ log u in radial symmetry.

The radial Laplacian is discretised conservatively on the dual cells of a
:class:`RadialGrid`: the flux through the midpoint face between nodes i and
i+1 is ω_n m^{n-1} (v_{i+1} - v_i)/(r_{i+1} - r_i) with v = log u, and the
face at the origin carries no flux.  At r = 0 this reduces to
Δf(0) ≈ 2n (f(r_1) - f(0)) / r_1².  The outermost node holds Dirichlet data.

Each time step is a Newton solve in v = log u, so every accepted iterate is
positive.  The Jacobian is tridiagonal.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.linalg import solve_banded

from ..profiles import RadialProfile, barenblatt_eval, cached_profile, self_similar_eval
from .grid import RadialGrid, State, build_grid

log = logging.getLogger(__name__)

U_MIN = 1e-300
NEWTON_TOL = 1e-12
MAX_ITER = 50
DT_MIN = 1e-12
GROWTH = 1.2
CLEAN_STEPS_BEFORE_GROWTH = 5


class NewtonError(RuntimeError):
    """Newton iteration did not converge; the caller should shrink dt."""


class SimulationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# boundary and initial data
# ---------------------------------------------------------------------------

BC_KINDS = ("exact_self_similar", "exact_barenblatt", "pinned_initial")


@dataclass(frozen=True)
class BoundaryCondition:
    """Dirichlet data g(R_dom, t) at the outer node.

    The two exact kinds also act as oracles through :meth:`exact`.
    """

    kind: str
    lam: float | None = None
    k: float | None = None
    T: float | None = None
    n: int | None = None
    pinned_value: float | None = None
    profile: RadialProfile | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in BC_KINDS:
            raise ValueError(f"unknown boundary condition kind {self.kind!r}")

    @classmethod
    def self_similar(cls, profile: RadialProfile) -> BoundaryCondition:
        if not profile.params.is_self_similar:
            raise ValueError("self-similar data need an alpha = 2 beta profile")
        return cls("exact_self_similar", lam=profile.params.lam, n=profile.params.n,
                   profile=profile)

    @classmethod
    def barenblatt(cls, n: int, k: float, T: float) -> BoundaryCondition:
        return cls("exact_barenblatt", k=k, T=T, n=n)

    @classmethod
    def pinned(cls, value: float | None = None) -> BoundaryCondition:
        return cls("pinned_initial", pinned_value=value)

    @property
    def is_exact(self) -> bool:
        return self.kind != "pinned_initial"

    def exact(self, r, t):
        if self.kind == "exact_self_similar":
            return self_similar_eval(self.profile, r, t)
        if self.kind == "exact_barenblatt":
            return barenblatt_eval(self.k, self.T, self.n, r, t)
        raise ValueError("pinned boundary data carry no exact solution")

    def value(self, R: float, t: float) -> float:
        g = self.pinned_value if self.kind == "pinned_initial" else float(self.exact(R, t))
        if g is None:
            raise ValueError("pinned boundary value not set")
        if not g > 0:
            raise SimulationError(f"boundary value {g!r} at t={t} is not positive")
        return g

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        for key in ("lam", "k", "T", "pinned_value"):
            if getattr(self, key) is not None:
                d[key] = getattr(self, key)
        return d


INIT_KINDS = ("profile", "profile_bump", "barenblatt", "table")


@dataclass(frozen=True)
class InitialData:
    """Declarative initial datum u₀.

    ``profile_bump`` is max(ψ_λ + A b(r), 0) with the compact bump
    b(r) = max(0, 1 - ((r - c)/r_s)²)²; a negative amplitude digs a hole.
    ``amplitude=None`` means 0.5 ψ_λ(0).  ``center="random"`` draws c from
    U(0, 2 r_s) with the configured seed.
    """

    kind: str
    lam: float = 1.0
    amplitude: float | None = None
    support: float = 1.0
    center: float | str = 0.0
    k: float = 1.0
    T: float = 1.0
    table_r: tuple = ()
    table_u: tuple = ()

    def __post_init__(self):
        if self.kind not in INIT_KINDS:
            raise ValueError(f"unknown initial data kind {self.kind!r}")
        if self.kind == "table" and len(self.table_r) != len(self.table_u):
            raise ValueError("table_r and table_u differ in length")

    def bump_center(self, seed: int) -> float:
        if self.center == "random":
            return float(np.random.default_rng(seed).uniform(0.0, 2.0 * self.support))
        return float(self.center)

    def bump(self, r, seed: int = 0) -> np.ndarray:
        amp = 0.5 * self.lam if self.amplitude is None else self.amplitude
        z = (np.asarray(r, dtype=float) - self.bump_center(seed)) / self.support
        return amp * np.maximum(0.0, 1.0 - z * z) ** 2

    def to_dict(self) -> dict:
        d = asdict(self)
        d["table_r"] = list(self.table_r)
        d["table_u"] = list(self.table_u)
        return d


def init_state(grid: RadialGrid, spec: InitialData, beta: float = 1.0, seed: int = 0,
               profile_tol: float = 1e-10) -> State:
    """Sample u₀ on the grid; exact zeros are floored at U_MIN."""
    r = grid.radii
    if spec.kind in ("profile", "profile_bump"):
        prof = cached_profile(grid.n, beta, spec.lam, grid.R_dom, profile_tol)
        u = prof(r)
        if spec.kind == "profile_bump":
            u = np.maximum(u + spec.bump(r, seed), 0.0)
    elif spec.kind == "barenblatt":
        u = barenblatt_eval(spec.k, spec.T, grid.n, r, 0.0)
    else:
        tr = np.asarray(spec.table_r, dtype=float)
        if r[-1] > tr[-1] or r[0] < tr[0]:
            raise ValueError("initial table does not cover the grid")
        u = np.interp(r, tr, np.asarray(spec.table_u, dtype=float))
    u = np.where(u > 0, u, U_MIN)
    return State(grid, 0.0, u)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    n: int
    beta: float
    R_dom: float
    initial: InitialData
    bc: dict
    t_end: float
    inner_h: float = 0.025
    nodes_per_decade: int = 64
    dt: float = 4e-3
    dt_max: float | None = None
    adaptive: bool = False
    scheme: str = "be"
    snapshot_times: tuple = ()
    newton_tol: float = NEWTON_TOL
    max_iter: int = MAX_ITER
    profile_tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if not self.R_dom > 0:
            raise ValueError("R_dom must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be nonnegative")
        if any(t < 0 or t > self.t_end for t in self.snapshot_times):
            raise ValueError("snapshot times must lie in [0, t_end]")
        if self.scheme not in ("be", "bdf2"):
            raise ValueError(f"unknown time scheme {self.scheme!r}")
        if self.bc.get("kind") not in BC_KINDS:
            raise ValueError(f"unknown boundary condition {self.bc!r}")

    def times(self) -> list[float]:
        return sorted({0.0, float(self.t_end), *map(float, self.snapshot_times)})

    def refined(self, factor: int = 2) -> SimConfig:
        """Same problem with inner_h and dt divided and node density multiplied."""
        return replace(
            self, inner_h=self.inner_h / factor, dt=self.dt / factor,
            nodes_per_decade=self.nodes_per_decade * factor,
            dt_max=None if self.dt_max is None else self.dt_max / factor,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["initial"] = self.initial.to_dict()
        d["snapshot_times"] = list(self.snapshot_times)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> SimConfig:
        d = dict(d)
        init = dict(d.pop("initial"))
        init["table_r"] = tuple(init.get("table_r", ()))
        init["table_u"] = tuple(init.get("table_u", ()))
        d["snapshot_times"] = tuple(d.get("snapshot_times", ()))
        return cls(initial=InitialData(**init), **d)

    def grid(self) -> RadialGrid:
        return build_grid(self.R_dom, self.n, self.inner_h, self.nodes_per_decade)

    def boundary(self, u0: State | None = None) -> BoundaryCondition:
        kind = self.bc["kind"]
        if kind == "exact_self_similar":
            prof = cached_profile(self.n, self.beta, self.bc.get("lam", 1.0), self.R_dom,
                                  self.profile_tol)
            return BoundaryCondition.self_similar(prof)
        if kind == "exact_barenblatt":
            return BoundaryCondition.barenblatt(self.n, self.bc.get("k", 1.0),
                                                self.bc.get("T", 1.0))
        value = self.bc.get("pinned_value")
        if value is None and u0 is not None:
            value = float(u0.u[-1])
        return BoundaryCondition.pinned(value)


# ---------------------------------------------------------------------------
# one implicit step
# ---------------------------------------------------------------------------

def _flux_divergence(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Σ of face fluxes into each node (length N, last entry unused)."""
    flux = a * np.diff(v)
    div = np.zeros_like(v)
    div[:-1] += flux
    div[1:] -= flux
    return div


def step(state: State, dt: float, bc: BoundaryCondition, previous: State | None = None,
         prev_dt: float | None = None, newton_tol: float = NEWTON_TOL,
         max_iter: int = MAX_ITER) -> State:
    """Advance ``state`` by ``dt``.

    Backward Euler by default.  When ``previous`` (the state one step back,
    taken ``prev_dt`` earlier) is given, variable-step BDF2 is used instead.
    Newton runs on v = log u with damping by step halving until the scaled
    residual max|G_i / J_ii| drops; it stops once that residual is below
    ``newton_tol``.

    Raises
    ------
    NewtonError
        No convergence within ``max_iter`` iterations.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    grid = state.grid
    t_new = state.t + dt
    g = bc.value(grid.R_dom, t_new)
    V = grid.measures[:-1]
    a = grid.face_coeff
    a_left = np.concatenate([[0.0], a[:-1]])
    a_right = a

    if previous is None:
        c0, rhs = 1.0, state.u[:-1]
    else:
        w = dt / prev_dt
        c0 = (1 + 2 * w) / (1 + w)
        rhs = (1 + w) * state.u[:-1] - w * w / (1 + w) * previous.u[:-1]

    v = np.log(state.u).copy()
    v[-1] = math.log(g)

    def residual(v):
        with np.errstate(over="ignore", invalid="ignore"):
            G = V * (c0 * np.exp(v[:-1]) - rhs) - dt * _flux_divergence(a, v)[:-1]
            diag = V * c0 * np.exp(v[:-1]) + dt * (a_left + a_right)
        return G, diag

    G, diag = residual(v)
    res = float(np.max(np.abs(G / diag)))
    iters = 0
    ab = np.zeros((3, V.size))
    while res > newton_tol:
        if iters >= max_iter:
            raise NewtonError(f"Newton failed at t={t_new:.6g}, dt={dt:.3g}: residual {res:.3e}")
        iters += 1
        ab[0, 1:] = -dt * a_right[:-1]
        ab[1] = diag
        ab[2, :-1] = -dt * a_right[:-1]
        delta = solve_banded((1, 1), ab, -G)
        if np.max(np.abs(delta)) <= 1e-15 * max(1.0, np.max(np.abs(v))):
            break  # stagnated at roundoff
        lam = 1.0
        while True:
            trial = v.copy()
            trial[:-1] += lam * delta
            G_t, diag_t = residual(trial)
            res_t = float(np.max(np.abs(G_t / diag_t)))
            if np.isfinite(res_t) and res_t < res:
                break
            lam *= 0.5
            if lam < 1e-10:
                raise NewtonError(f"damping failed at t={t_new:.6g}, dt={dt:.3g}")
        v, G, diag, res = trial, G_t, diag_t, res_t

    u = np.exp(v)
    if not np.all(u > 0):
        raise NewtonError(f"underflow to zero at t={t_new:.6g}")
    return State(grid, t_new, u, {"newton_iters": iters, "residual": res, "dt": dt})


# ---------------------------------------------------------------------------
# time loop
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Trajectory:
    snapshots: tuple
    steps: tuple
    config: SimConfig | None = None
    bc: BoundaryCondition | None = None

    def __post_init__(self):
        times = [s.t for s in self.snapshots]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("snapshot times must increase strictly")

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    @property
    def grid(self) -> RadialGrid:
        return self.snapshots[0].grid

    def at(self, t: float) -> State:
        for s in self.snapshots:
            if math.isclose(s.t, t, rel_tol=1e-12, abs_tol=1e-12):
                return s
        raise KeyError(f"no snapshot at t={t}")

    def dt_sequence(self) -> np.ndarray:
        return np.array([s["dt"] for s in self.steps])


def run(config: SimConfig, grid: RadialGrid | None = None) -> Trajectory:
    """Integrate from t = 0 to ``config.t_end``, recording snapshots.

    Snapshot times are hit exactly by clipping dt.  On Newton failure dt is
    halved; with ``config.adaptive`` it grows by 1.2x after 5 clean steps up
    to ``dt_max``.  Raises :class:`SimulationError` once dt falls below 1e-12.
    """
    grid = grid or config.grid()
    state = init_state(grid, config.initial, config.beta, config.seed, config.profile_tol)
    bc = config.boundary(state)
    # Dirichlet node takes the boundary data from the start
    if bc.kind != "pinned_initial":
        u0 = state.u.copy()
        u0[-1] = bc.value(grid.R_dom, 0.0)
        state = State(grid, 0.0, u0)

    targets = config.times()
    snapshots = [state]
    steps = []
    dt = config.dt
    dt_max = config.dt_max or config.dt
    clean = 0
    previous, prev_dt = None, None
    for target in targets[1:]:
        while state.t < target:
            remaining = target - state.t
            h = min(dt, remaining)
            if remaining - h < 1e-9 * dt:
                h = remaining
            use_bdf2 = config.scheme == "bdf2" and previous is not None
            try:
                new = step(state, h, bc,
                           previous=previous if use_bdf2 else None,
                           prev_dt=prev_dt if use_bdf2 else None,
                           newton_tol=config.newton_tol, max_iter=config.max_iter)
            except NewtonError as exc:
                dt = 0.5 * min(dt, h)
                clean = 0
                log.debug("halving dt to %.3g: %s", dt, exc)
                if dt < DT_MIN:
                    raise SimulationError(f"dt underflow at t={state.t:.6g}") from exc
                continue
            if h >= remaining:
                new = State(grid, target, new.u, new.meta)
            steps.append({"t": new.t, "dt": h, "newton_iters": new.meta["newton_iters"],
                          "residual": new.meta["residual"]})
            previous, prev_dt = state, h
            state = new
            clean += 1
            if config.adaptive and clean >= CLEAN_STEPS_BEFORE_GROWTH and dt < dt_max:
                dt = min(dt * GROWTH, dt_max)
                clean = 0
        snapshots.append(state)
    return Trajectory(tuple(snapshots), tuple(steps), config, bc)
