"""Steady-state simulation of microwave-to-optical photon conversion by a
rare-earth ion ensemble in overlapping microwave and optical cavities."""

from .config import (
    AtomParams,
    CavityParams,
    ConfigError,
    DriveSettings,
    EnsembleSpec,
    FieldState,
    ModelConfig,
    NumericsSettings,
    load_config,
)
from .atom import AtomDetunings, build_hamiltonian, build_liouvillian, steady_state
from .ensemble import EnsembleSums, STerms, integrate_linear_sums, integrate_nonlinear_sums
from .linear import ScatteringCoefficients, conversion_efficiency, scattering
from .nonlinear import cavity_update, output_fields, solve_fields
from .optimizer import OptimizationProblem, OptimizationResult, optimize, scan_detunings, sweep

__version__ = "0.1.0"

__all__ = [
    "AtomDetunings",
    "AtomParams",
    "CavityParams",
    "ConfigError",
    "DriveSettings",
    "EnsembleSpec",
    "EnsembleSums",
    "FieldState",
    "ModelConfig",
    "NumericsSettings",
    "OptimizationProblem",
    "OptimizationResult",
    "STerms",
    "ScatteringCoefficients",
    "build_hamiltonian",
    "build_liouvillian",
    "cavity_update",
    "conversion_efficiency",
    "integrate_linear_sums",
    "integrate_nonlinear_sums",
    "load_config",
    "optimize",
    "output_fields",
    "scan_detunings",
    "scattering",
    "solve_fields",
    "steady_state",
    "sweep",
]
