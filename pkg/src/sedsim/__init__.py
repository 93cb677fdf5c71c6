"""sedsim: stochastic electrodynamics of a charged particle, stage by stage.

The package follows one chain numerically: a classical charged particle
with radiation reaction in the vacuum radiation field relaxes to a
stationary ensemble; the ensemble's phase-space statistics obey a
momentum-dispersion identity that calibrates beta = hbar/2; the resulting
hydrodynamic equations close into a linear wave equation; and the wave
picture is cross-checked through phase-space transforms and a variational
ground-state solver.  Each stage exposes the quantities needed to verify
the next stage's premises.
"""

from ._backend import COMPILED_AVAILABLE, backend_name, get_kernels
from .params import (
    PhysicalParams,
    Potential,
    coupling_for_tau,
    default_params,
    radiation_reaction_tau,
)
from .zpf import ModeSet, SpectralConfig, build_modes, eval_field, sample_realization
from .ensemble import (
    BalanceReport,
    BetaFit,
    Ensemble,
    EnsembleResult,
    balance_report,
    calibrate_beta,
    damping_rate,
    energy_series,
    evolve_ensemble,
    fit_decay_rate,
    mean_energy,
    step_trajectory,
)

__version__ = "0.1.0"

__all__ = [
    "COMPILED_AVAILABLE",
    "BalanceReport",
    "BetaFit",
    "Ensemble",
    "EnsembleResult",
    "ModeSet",
    "SpectralConfig",
    "PhysicalParams",
    "Potential",
    "backend_name",
    "balance_report",
    "build_modes",
    "calibrate_beta",
    "coupling_for_tau",
    "damping_rate",
    "default_params",
    "energy_series",
    "eval_field",
    "evolve_ensemble",
    "fit_decay_rate",
    "get_kernels",
    "mean_energy",
    "radiation_reaction_tau",
    "sample_realization",
    "step_trajectory",
    "__version__",
]
