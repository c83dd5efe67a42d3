"""Mean-field simulation of a driven cavity coupled to a broadened spin
ensemble: steady-state bistability, hysteresis, quench dynamics, and
critical-slowing-down analysis."""

from .errors import (
    ConfigError,
    FitError,
    NoTransitError,
    NumericalFailure,
    ParameterError,
    RateOrderingWarning,
    StiffnessError,
)
from .model import (
    PhysicalParams,
    SystemState,
    Trajectory,
    drive_from_power,
    from_db,
    maxwell_bloch_rhs,
    power_from_drive,
    to_db,
    transmission,
)
from .ensemble import EnsembleSpec, SpinClusters, cooperativity, discretize, q_gaussian_density
from .steady import (
    BistabilityDiagram,
    BranchPoint,
    Stability,
    asymptotes,
    find_folds,
    hysteresis_sweep,
    sigma_z_steady,
    steady_roots,
)
from .adiabatic import AdiabaticModel, adiabatic_fixed_points, adiabatic_rhs, potential
from .integrate import SolveResult, solve
from .dynamics import (
    Branch,
    IntegratorConfig,
    QuenchResult,
    ScalingFit,
    asymptotic_decay_rate,
    detect_steady,
    fit_scaling,
    integrate_full,
    integrate_slaved,
    quench,
    quench_ladder,
    slaved_cavity,
    switching_time,
)

__version__ = "0.1.0"

__all__ = [
    "AdiabaticModel",
    "BistabilityDiagram",
    "Branch",
    "BranchPoint",
    "ConfigError",
    "EnsembleSpec",
    "FitError",
    "IntegratorConfig",
    "NoTransitError",
    "NumericalFailure",
    "ParameterError",
    "PhysicalParams",
    "QuenchResult",
    "RateOrderingWarning",
    "ScalingFit",
    "SolveResult",
    "SpinClusters",
    "Stability",
    "StiffnessError",
    "SystemState",
    "Trajectory",
    "adiabatic_fixed_points",
    "adiabatic_rhs",
    "asymptotes",
    "asymptotic_decay_rate",
    "cooperativity",
    "detect_steady",
    "discretize",
    "drive_from_power",
    "find_folds",
    "fit_scaling",
    "from_db",
    "hysteresis_sweep",
    "integrate_full",
    "integrate_slaved",
    "maxwell_bloch_rhs",
    "potential",
    "power_from_drive",
    "q_gaussian_density",
    "quench",
    "quench_ladder",
    "sigma_z_steady",
    "slaved_cavity",
    "solve",
    "steady_roots",
    "switching_time",
    "to_db",
    "transmission",
]
