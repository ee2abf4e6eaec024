"""Reduction of nonholonomic systems with symmetry by gauge momenta."""
from ._kernels import BACKEND
from .chaplygin import ReducedChart, lift_state, reduce_state, reduced_vector_field
from .examples import NAMES, ExampleSpec, ParameterError, build_example
from .gauge import GaugePack, build_gauge
from .geometry import CoVector, FrameChart
from .integrate import DomainExitError, Trajectory, integrate
from .mwreduce import LeafChart, build_leaf, omega_mu_matrix
from .symmetry import GroupData, SectionBasis, assemble_momentum_ode, solve_momentum_ode
from .system import MState, NonholonomicSystem, hamel_vector_field, nonholonomic_vector_field

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CoVector",
    "DomainExitError",
    "ExampleSpec",
    "FrameChart",
    "GaugePack",
    "GroupData",
    "LeafChart",
    "MState",
    "NAMES",
    "NonholonomicSystem",
    "ParameterError",
    "ReducedChart",
    "SectionBasis",
    "Trajectory",
    "assemble_momentum_ode",
    "build_example",
    "build_gauge",
    "build_leaf",
    "hamel_vector_field",
    "integrate",
    "lift_state",
    "nonholonomic_vector_field",
    "omega_mu_matrix",
    "reduce_state",
    "reduced_vector_field",
    "solve_momentum_ode",
]
