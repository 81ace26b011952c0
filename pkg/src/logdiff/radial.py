"""Radial geometry shared by the profile and PDE code: sphere areas, shell
measures and the mixed uniform/geometric node layout."""

from __future__ import annotations

import math

import numpy as np


def omega(n: int) -> float:
    """Surface area of the unit sphere S^{n-1} in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def ball_volume(R: float, n: int) -> float:
    return omega(n) * R**n / n


def shell_measures(radii: np.ndarray, n: int) -> np.ndarray:
    """Volume of the dual cell of every node.

    Dual cells are bounded by the midpoints between consecutive nodes, by 0
    on the left and by ``radii[-1]`` on the right, so the measures telescope
    to the volume of the ball of radius ``radii[-1]``.
    """
    radii = np.asarray(radii, dtype=float)
    edges = np.empty(radii.size + 1)
    edges[0] = 0.0
    edges[1:-1] = 0.5 * (radii[1:] + radii[:-1])
    edges[-1] = radii[-1]
    return omega(n) / n * np.diff(edges**n)


def mixed_radii(R: float, inner_h: float, nodes_per_decade: int) -> np.ndarray:
    """Uniform nodes of spacing ~inner_h on [0, min(R, 1)], geometric beyond.

    The geometric part is anchored at r = 1 (nodes 10**(k/nodes_per_decade))
    and the last node is moved onto R exactly; a geometric node closer to R
    than half a geometric step is dropped.
    """
    if R <= 0:
        raise ValueError("R must be positive")
    r_in = min(R, 1.0)
    m = max(1, int(round(r_in / inner_h)))
    inner = np.linspace(0.0, r_in, m + 1)
    if R <= 1.0:
        return inner
    k_max = int(math.ceil(nodes_per_decade * math.log10(R) - 1e-9))
    outer = 10.0 ** (np.arange(1, k_max + 1) / nodes_per_decade)
    outer = outer[outer < R]
    ratio = 10.0 ** (1.0 / nodes_per_decade)
    if outer.size and R / outer[-1] < math.sqrt(ratio):
        outer = outer[:-1]
    return np.concatenate([inner, outer, [R]])
