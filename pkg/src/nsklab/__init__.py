"""
nsklab: pseudo-spectral Navier-Stokes-Korteweg flows on the periodic box.

The package solves the compressible Korteweg system in several equivalent
formulations, measures Littlewood-Paley and Besov norms of the fields, and
ships verification suites for the linear semigroup, the quasi-solution, the
energy inequality and the critical scaling.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .config import ConfigError, RunConfig, load_config
from .diagnostics import dissipation_check, energy, linf_monitor, scaling_invariance_check
from .linear import LinearCoeffs, LinearSymbol, apply_semigroup, closed_form_exp, semigroup_matrices
from .littlewood_paley import BesovSpec, DyadicBlockTransformer, DyadicPartition, besov_norm
from .model import Params, PressureLaw, make_model
from .solver import TimeStepperConfig, Trajectory, picard_solve, simulate, solve_heat, step_exponential
from .spectral import Grid, SpectralField
from .state import FluidState

__all__ = [
    "BesovSpec",
    "ConfigError",
    "DyadicBlockTransformer",
    "DyadicPartition",
    "FluidState",
    "Grid",
    "LinearCoeffs",
    "LinearSymbol",
    "Params",
    "PressureLaw",
    "RunConfig",
    "SpectralField",
    "TimeStepperConfig",
    "Trajectory",
    "__version__",
    "apply_semigroup",
    "besov_norm",
    "closed_form_exp",
    "dissipation_check",
    "energy",
    "linf_monitor",
    "load_config",
    "make_model",
    "picard_solve",
    "scaling_invariance_check",
    "semigroup_matrices",
    "simulate",
    "solve_heat",
    "step_exponential",
]
