"""Truncated radial mesh and the solution state living on it."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ..radial import ball_volume, mixed_radii, omega, shell_measures

MIN_NODES = 16


@dataclass(frozen=True, eq=False)
class RadialGrid:
    radii: np.ndarray
    n: int
    inner_h: float = float("nan")
    nodes_per_decade: int = 0

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        if r[0] != 0.0 or np.any(np.diff(r) <= 0):
            raise ValueError("radii must start at 0 and increase strictly")
        r.setflags(write=False)
        object.__setattr__(self, "radii", r)

    @property
    def R_dom(self) -> float:
        return float(self.radii[-1])

    @property
    def size(self) -> int:
        return self.radii.size

    @cached_property
    def measures(self) -> np.ndarray:
        """ω_n-weighted volume of each node's dual cell."""
        m = shell_measures(self.radii, self.n)
        m.setflags(write=False)
        return m

    @cached_property
    def face_coeff(self) -> np.ndarray:
        """Flux weight ω_n m^{n-1}/(r_{i+1} - r_i) at the midpoint face m
        between nodes i and i+1."""
        mid = 0.5 * (self.radii[1:] + self.radii[:-1])
        a = omega(self.n) * mid ** (self.n - 1) / np.diff(self.radii)
        a.setflags(write=False)
        return a

    def same_as(self, other: RadialGrid) -> bool:
        return self is other or (
            self.n == other.n
            and self.radii.shape == other.radii.shape
            and np.array_equal(self.radii, other.radii)
        )

    def restrict(self, R: float) -> np.ndarray:
        """Shell measures of the ball B_R: cells are clipped at R, nodes past
        R get zero weight."""
        edges = np.empty(self.size + 1)
        edges[0] = 0.0
        edges[1:-1] = 0.5 * (self.radii[1:] + self.radii[:-1])
        edges[-1] = self.R_dom
        edges = np.minimum(edges, R)
        return omega(self.n) / self.n * np.diff(edges**self.n)


def build_grid(R_dom: float, n: int, inner_h: float, nodes_per_decade: int) -> RadialGrid:
    """Uniform spacing ``inner_h`` on [0, 1], geometric spacing beyond.

    Raises ``ValueError`` if the parameters give fewer than 16 nodes.
    """
    if not R_dom > 1:
        raise ValueError("R_dom must exceed 1")
    if not inner_h > 0 or nodes_per_decade < 1:
        raise ValueError("inner_h must be positive and nodes_per_decade >= 1")
    radii = mixed_radii(R_dom, inner_h, nodes_per_decade)
    if radii.size < MIN_NODES:
        raise ValueError(f"grid has {radii.size} nodes, fewer than {MIN_NODES}")
    grid = RadialGrid(radii, n, inner_h, nodes_per_decade)
    assert abs(grid.measures.sum() / ball_volume(R_dom, n) - 1) < 1e-12
    return grid


def uniform_grid(R: float, n: int, size: int) -> RadialGrid:
    return RadialGrid(np.linspace(0.0, R, size), n)


@dataclass(frozen=True, eq=False)
class State:
    grid: RadialGrid
    t: float
    u: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        if u.shape != self.grid.radii.shape:
            raise ValueError("state length does not match grid")
        if not np.all(np.isfinite(u)):
            raise ValueError(f"non-finite state at t={self.t}")
        if not np.all(u > 0):
            raise ValueError(f"nonpositive state at t={self.t}: min u = {u.min():g}")
        if self.t < 0:
            raise ValueError("t must be nonnegative")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    @property
    def r(self) -> np.ndarray:
        return self.grid.radii
