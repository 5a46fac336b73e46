"""Numerical laboratory for radial power extensions of sphere and cube
boundary functions, their fractional Sobolev norms, and the scaling laws
that govern them."""

__version__ = "0.1.0"

from .geometry import (  # noqa: F401
    CapChart,
    Domain,
    RngStream,
    cap_chart_build,
    gnomonic,
    norm,
    phi_map,
    sample,
)
