"""Self-similar profiles and radial simulation of the logarithmic diffusion
equation u_t = Δ log u in dimension n ≥ 3."""

__version__ = "0.1.0"
