"""Numerical laboratory for the motion of an inextensible hanging string.

The string occupies the arc-length interval [0, 1]: s = 0 is the free end
(where the tension vanishes and the wave operator degenerates), s = 1 is the
fixed end.  The package integrates the degenerate nonlinear wave system with
its nonlocally determined tension and ships the verification instruments
around it: weighted norms, the initial-value jet recursion, compatibility
repair, stability and energy diagnostics.
"""

__version__ = "0.1.0"

from .grid import Grid, DiffOps, StringState, make_grid
from .tension import TensionField, BvpInputs, solve_tbvp, tension_from_state

__all__ = [
    "Grid",
    "DiffOps",
    "StringState",
    "make_grid",
    "TensionField",
    "BvpInputs",
    "solve_tbvp",
    "tension_from_state",
    "__version__",
]
