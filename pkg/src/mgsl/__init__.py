"""Preconditioned Runge-Kutta and additive W multigrid smoothers for the 2D Euler equations.

Modules by role:

* :mod:`mgsl.euler_core` frozen-state Jacobians, eigenvalue cutoff and flux splitting
* :mod:`mgsl.fourier_symbols` Fourier symbols of the JST operator
* :mod:`mgsl.preconditioners` SGS and exact preconditioners, symbol and physical-space forms
* :mod:`mgsl.smoothers` scheme registry and the low-storage stage recursion
* :mod:`mgsl.lfa` discrete Fourier analysis, stability search and optimization
* :mod:`mgsl.fv_solver` periodic finite-volume FAS multigrid solver
* :mod:`mgsl.cli` the ``mgsl`` command
"""

from .errors import (
    ConfigError,
    DivergedState,
    MGSLError,
    NonConvergence,
    NonPhysicalState,
    SingularDiagonal,
    UnknownScheme,
)
from .euler_core import U1, U3, EulerState, apply_cutoff, flux_jacobian, primitive_from_conservative, split_jacobian
from .lfa import UNBOUNDED, AnalysisConfig, analyze, max_stable_cfl, optimize
from .smoothers import SCHEMES, scheme_registry

__version__ = "0.1.0"

__all__ = [
    "AnalysisConfig",
    "ConfigError",
    "DivergedState",
    "EulerState",
    "MGSLError",
    "NonConvergence",
    "NonPhysicalState",
    "SCHEMES",
    "SingularDiagonal",
    "U1",
    "U3",
    "UNBOUNDED",
    "UnknownScheme",
    "analyze",
    "apply_cutoff",
    "flux_jacobian",
    "max_stable_cfl",
    "optimize",
    "primitive_from_conservative",
    "scheme_registry",
    "split_jacobian",
]
