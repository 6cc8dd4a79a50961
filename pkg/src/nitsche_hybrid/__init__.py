"""Nitsche hybrid finite element method for elliptic problems with local defects.

A fine mesh resolves the oscillating coefficient near the defect, a coarse
mesh carries an effective (upscaled) coefficient elsewhere, and the two
non-matching discretizations are glued by a Nitsche interface penalty.
"""
from .coefficients import HybridCoefficient, MatrixField, example1_effective, example1_micro
from .experiments import ExperimentConfig, build_scenario, run_experiment, solve_hybrid
from .fem import FeSpace
from .geometry import Channel, Ellipse, EllipseSpec, Well, build_partition
from .interface import build_interface
from .mesh import build_mesh_pair
from .nitsche import assemble_nitsche, broken_energy_norm, penalty_lower_bound
from .solver import solve_spd
from .transition import C0RingTransition, C1WellTransition
from .upscaling import effective_matrix_at, tabulate_effective

__all__ = [
    "C0RingTransition",
    "C1WellTransition",
    "Channel",
    "Ellipse",
    "EllipseSpec",
    "ExperimentConfig",
    "FeSpace",
    "HybridCoefficient",
    "MatrixField",
    "Well",
    "assemble_nitsche",
    "broken_energy_norm",
    "build_interface",
    "build_mesh_pair",
    "build_partition",
    "build_scenario",
    "effective_matrix_at",
    "example1_effective",
    "example1_micro",
    "penalty_lower_bound",
    "run_experiment",
    "solve_hybrid",
    "solve_spd",
    "tabulate_effective",
]

__version__ = "0.1.0"
