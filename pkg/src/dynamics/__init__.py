"""Nominal single-track dynamics and the composed terrain-aware step."""

from dynamics.composed import assemble_gp_input, composed_step, propagate, wrap_angle
from dynamics.single_track import ode_step, st_derivative

__all__ = [
    "assemble_gp_input",
    "composed_step",
    "ode_step",
    "propagate",
    "st_derivative",
    "wrap_angle",
]
