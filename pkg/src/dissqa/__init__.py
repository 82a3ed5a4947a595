"""Dissipative quantum annealing of the transverse-field Ising chain."""
from __future__ import annotations

__version__ = "0.1.0"

from .analysis import (DefectCurve, OwpClassification, OwpKind, additivity_gap, classify_curve,
                       find_T_low, find_T_up, fit_T_up_asymptotic, kz_fit, sweep_tau)
from .bath import BathSpec, rates
from .dynamics import AnnealConfig, EvolutionKind, IntegratorPolicy, anneal_chain, relax_chain
from .errors import (ConfigError, DissqaError, DomainError, IntegratorBlowup, NumericalError,
                     StateError)
from .model import Schedule, dispersion, k_values
from .thermo import (n_therm, obc_diagonalize, thermal_defects_full, thermal_defects_obc,
                     thermal_defects_restricted)

__all__ = [
    "AnnealConfig", "BathSpec", "ConfigError", "DefectCurve", "DissqaError", "DomainError",
    "EvolutionKind", "IntegratorBlowup", "IntegratorPolicy", "NumericalError", "OwpClassification",
    "OwpKind", "Schedule", "StateError", "additivity_gap", "anneal_chain", "classify_curve",
    "dispersion", "find_T_low", "find_T_up", "fit_T_up_asymptotic", "k_values", "kz_fit",
    "n_therm", "obc_diagonalize", "rates", "relax_chain", "sweep_tau", "thermal_defects_full",
    "thermal_defects_obc", "thermal_defects_restricted",
]
