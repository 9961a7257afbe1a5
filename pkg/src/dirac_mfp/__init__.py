"""Numerical laboratory for the congested planning problem started from a
point mass.

The library solves the one-dimensional planning system

    -u_t + |u_x|^2 / 2 = m**theta,      m_t - (m u_x)_x = 0,

with a Dirac initial density (regularized at scale ``eps``) and a prescribed
terminal density, through its Lagrangian formulation: the monotone flow map
of the density solves a degenerate elliptic boundary-value problem in
(time, mass label), which is minimized as a convex transport energy.  On top
of the solved flow the package reconstructs Eulerian density/velocity/value
fields, the free boundary, the continuously rescaled system with its
Lyapunov functional, and rate certificates for convergence to the
self-similar profile.
"""

from . import errors
from .profile import Profile, make_profile
from .solver import FlowField, SolverConfig, make_grid, solve
from .target import TerminalDensity, power_bump, self_similar_terminal

__version__ = "0.1.0"

__all__ = [
    "errors",
    "Profile",
    "make_profile",
    "FlowField",
    "SolverConfig",
    "make_grid",
    "solve",
    "TerminalDensity",
    "power_bump",
    "self_similar_terminal",
    "__version__",
]
