"""Radial solver for u_t = Δ log u and the checks run on its output."""

from .checks import (
    CheckReport,
    ErrorReport,
    aronson_benilan_check,
    comparison_check,
    comparison_with_exact,
    decay_sequence,
    envelope_bracket,
    interpolate_state,
    l1_distance,
    rescale_state,
    rescaled_residual,
    residual_exact,
    rescaled_nodes,
    sandwich_check,
    sup_distance,
)
from .grid import RadialGrid, State, build_grid, uniform_grid
from .solver import (
    BoundaryCondition,
    InitialData,
    NewtonError,
    SimConfig,
    SimulationError,
    Trajectory,
    init_state,
    run,
    step,
)

__all__ = [
    "RadialGrid",
    "State",
    "build_grid",
    "uniform_grid",
    "CheckReport",
    "ErrorReport",
    "aronson_benilan_check",
    "comparison_check",
    "comparison_with_exact",
    "decay_sequence",
    "envelope_bracket",
    "interpolate_state",
    "l1_distance",
    "rescale_state",
    "rescaled_residual",
    "residual_exact",
    "rescaled_nodes",
    "sandwich_check",
    "sup_distance",
    "BoundaryCondition",
    "InitialData",
    "NewtonError",
    "SimConfig",
    "SimulationError",
    "Trajectory",
    "init_state",
    "run",
    "step",
]
