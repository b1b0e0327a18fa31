"""
Steady-state simulation of absorption recovery in inhomogeneously broadened
ensembles of multilevel absorbers.

The package is layered:

``scheme``      level structures, drive fields and presets
``liouville``   Lindblad superoperator and steady states of one absorber
``ensemble``    Gaussian ensemble averages, spectra and peaks
``recovery``    closed-form estimates and spectrum measurements
``optimize``    sweeps, enhancement maximization and figure datasets
"""

from .ensemble import (
    QuadratureGrid,
    Spectrum,
    ensemble_absorption,
    intensity_average,
    locate_peak,
    peak,
    quadrature_grid,
    spectrum,
)
from .errors import *  # noqa: F401,F403
from .liouville import (
    ShiftSample,
    SteadyStateSolution,
    build_hamiltonian,
    build_liouvillian,
    evolve_oracle,
    normalized_absorption,
    steady_state,
)
from .optimize import (
    OptimumReport,
    SweepSpec,
    maximize_beta,
    reproduce_figure,
    sweep,
)
from .recovery import (
    CompensationPlan,
    EnhancementPrediction,
    at_window_width,
    compensation_plan,
    extract_beta,
    inhomogeneous_limit,
    predicted_beta,
    scattering_rates,
    simulate_beta,
)
from .scheme import (
    DephasingChannel,
    DriveField,
    InhomogeneityModel,
    Level,
    LevelScheme,
    build_scheme,
    preset,
)

__version__ = "0.1.0"
