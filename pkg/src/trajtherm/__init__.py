"""Stochastic thermodynamics of continuously monitored open quantum systems.

Quantum-jump and diffusive trajectory unravelings of Lindblad dynamics inside
a two-point-measurement scheme, with per-trajectory heat, work components,
entropy flow and entropy production, and verified fluctuation theorems.
"""

from .ensemble import EnsembleStats, Histogram, convergence_series, histogram, run_ensemble
from .entropy import (
    adiabatic_nonadiabatic_split,
    integral_ft_estimate,
    kl_irreversibility,
    split_gate,
    system_entropy_change,
    tail_bound_check,
    total_entropy_production,
    uncertainty_martingale_split,
)
from .lindblad import lindblad_propagate, steady_state
from .model import SystemModel, build_preset, hamiltonian_at, preset_names, validate_channel_set
from .records import TrajectoryRecord, read_records, write_records
from .streams import TrajectoryStream
from .trajectories import diffusive_step, jump_step, no_jump_propagator, run_trajectory

__version__ = "0.1.0"

__all__ = [
    "EnsembleStats",
    "Histogram",
    "SystemModel",
    "TrajectoryRecord",
    "TrajectoryStream",
    "adiabatic_nonadiabatic_split",
    "build_preset",
    "convergence_series",
    "diffusive_step",
    "hamiltonian_at",
    "histogram",
    "integral_ft_estimate",
    "jump_step",
    "kl_irreversibility",
    "lindblad_propagate",
    "no_jump_propagator",
    "preset_names",
    "read_records",
    "run_ensemble",
    "run_trajectory",
    "split_gate",
    "steady_state",
    "system_entropy_change",
    "tail_bound_check",
    "total_entropy_production",
    "uncertainty_martingale_split",
    "validate_channel_set",
    "write_records",
]
