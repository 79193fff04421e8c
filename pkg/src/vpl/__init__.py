"""Rotating vortex patches in the unit disk: variational maximizers,
their small-core asymptotics and their Euler time evolution."""
from .diagnostics import SweepRecord, rankine, run_sweep, scaling_fit, solve_and_measure
from .estimator import RotatingPatchMaximizer
from .evolution import PerturbationSpec, dist_to_orbit, evolve, perturb, stability_experiment
from .exceptions import (
    CFLError,
    ContractViolation,
    ConvergenceWarning,
    DomainError,
    MonotonicityError,
    NonFiniteFieldError,
)
from .geometry import RotationParams, greens, kr_landscape, kr_minimizer_radius, regular_part, robin
from .grid import PolarGrid, ScalarField, dump_field, load_field
from .maximizer import PatchState, energy, residual_weak_form, solve_patch, threshold
from .poisson import solve_direct, solve_fast, velocity

__version__ = "0.1.0"

__all__ = [
    "CFLError",
    "ContractViolation",
    "ConvergenceWarning",
    "DomainError",
    "MonotonicityError",
    "NonFiniteFieldError",
    "PatchState",
    "PerturbationSpec",
    "PolarGrid",
    "RotatingPatchMaximizer",
    "RotationParams",
    "ScalarField",
    "SweepRecord",
    "dist_to_orbit",
    "dump_field",
    "energy",
    "evolve",
    "greens",
    "kr_landscape",
    "kr_minimizer_radius",
    "load_field",
    "perturb",
    "rankine",
    "regular_part",
    "residual_weak_form",
    "robin",
    "run_sweep",
    "scaling_fit",
    "solve_and_measure",
    "solve_direct",
    "solve_fast",
    "solve_patch",
    "stability_experiment",
    "threshold",
    "velocity",
]
