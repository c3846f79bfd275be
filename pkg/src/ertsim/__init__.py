"""Simulation toolkit for Markovian open quantum systems.

The central solver propagates an ensemble of pure states through a
one-step Kraus decomposition of the Lindblad generator and repeatedly
compresses the ensemble onto its dominant principal components, keeping
at most a configured number of states.  A dense master-equation
integrator and a quantum-jump Monte-Carlo solver serve as references for
validation and benchmarking.
"""

__version__ = "0.1.0"

from .analysis import (
    SweepCell,
    SweepResult,
    SweepRow,
    SweepSpec,
    benchmark_sweep,
    fundamental_frequency,
    integrated_error,
    power_spectrum,
    steady_state_current,
)
from .errors import ConfigError, ErtsimError, MemoryCapError, NumericalError
from .ert import (
    Ensemble,
    ErtConfig,
    evolve,
    expectation,
    init_ensemble,
    kraus_step,
    orthogonalize_truncate,
    reconstruct_density,
)
from .kraus import (
    KrausPair,
    KrausSet,
    build_generator,
    build_kraus_set,
    completeness_residual,
    default_timestep,
)
from .models import (
    CavityParams,
    HubbardParams,
    ModelSpec,
    SpinChainParams,
    build_cavity,
    build_fermi_hubbard,
    build_heisenberg,
    dipole_acceleration,
    jordan_wigner,
    site_operator,
)
from .reference import (
    Liouvillian,
    WmcConfig,
    build_liouvillian,
    exact_evolve,
    wmc_evolve,
    wmc_trajectory,
)
from .series import TimeSeries

__all__ = [
    "__version__",
    "Ensemble", "ErtConfig", "evolve", "expectation", "init_ensemble",
    "kraus_step", "orthogonalize_truncate", "reconstruct_density",
    "KrausPair", "KrausSet", "build_generator", "build_kraus_set",
    "completeness_residual", "default_timestep",
    "ModelSpec", "SpinChainParams", "CavityParams", "HubbardParams",
    "build_heisenberg", "build_cavity", "build_fermi_hubbard",
    "dipole_acceleration", "jordan_wigner", "site_operator",
    "Liouvillian", "WmcConfig", "build_liouvillian", "exact_evolve",
    "wmc_evolve", "wmc_trajectory",
    "TimeSeries", "integrated_error", "power_spectrum",
    "fundamental_frequency", "steady_state_current",
    "SweepCell", "SweepSpec", "SweepRow", "SweepResult", "benchmark_sweep",
    "ErtsimError", "ConfigError", "MemoryCapError", "NumericalError",
]
