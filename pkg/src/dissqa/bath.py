"""Ohmic bath and the Bloch-Redfield rates of a single momentum mode."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError
from .model import dispersion

# below this |x| coth is evaluated from its Laurent series
COTH_SERIES_CUT = 1e-4


@dataclass(frozen=True)
class BathSpec:
    """Ohmic bath. ``t_eff`` is the effective system temperature T = T_b / 2."""

    alpha: float = 1e-2
    omega_c: float = 10.0
    t_eff: float = 1.0

    def __post_init__(self):
        if not self.alpha >= 0.0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if not self.omega_c > 0.0:
            raise ConfigError(f"omega_c must be > 0, got {self.omega_c}")
        if not self.t_eff > 0.0:
            raise ConfigError(f"t_eff must be > 0, got {self.t_eff}")

    @property
    def t_bath(self) -> float:
        return 2.0 * self.t_eff

    @property
    def beta_b(self) -> float:
        return 1.0 / (2.0 * self.t_eff)


@dataclass(frozen=True)
class RateSet:
    gamma_R: float
    gamma_phi: float
    gamma_D: float
    gamma_zx: float
    gamma_xz: float
    r_bar_x: float


def coth(x):
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < COTH_SERIES_CUT
    safe = np.where(small, 1.0, x)
    out = np.where(small, 1.0 / np.where(small, x, 1.0) + x / 3.0, 1.0 / np.tanh(safe))
    return float(out) if out.ndim == 0 else out


def ohmic_spectral_density(omega, bath: BathSpec):
    """J(omega) = 2 alpha omega exp(-omega / omega_c)."""
    if np.any(np.asarray(omega) < 0):
        raise DomainError("spectral density is defined for omega >= 0")
    val = 2.0 * bath.alpha * omega * np.exp(-omega / bath.omega_c)
    return float(val) if np.ndim(val) == 0 else val


def coth_times_spectral(lam, bath: BathSpec):
    """coth(beta_b * lam) * J(2 * lam), finite as lam -> 0 (limit 4 alpha / beta_b)."""
    lam = np.asarray(lam, dtype=float)
    x = bath.beta_b * lam
    small = np.abs(x) < COTH_SERIES_CUT
    # (1/x + x/3) * 4 alpha lam e^{-2 lam / wc} with lam / x = 1 / beta_b
    series = 4.0 * bath.alpha * (1.0 / bath.beta_b + x * lam / 3.0) * np.exp(-2.0 * lam / bath.omega_c)
    direct = coth(np.where(small, 1.0, x)) * 4.0 * bath.alpha * lam * np.exp(-2.0 * lam / bath.omega_c)
    out = np.where(small, series, direct)
    return float(out) if out.ndim == 0 else out


def equilibrium_rx(eps, bath: BathSpec):
    val = -np.tanh(bath.beta_b * np.asarray(eps, dtype=float))
    return float(val) if np.ndim(val) == 0 else val


def rates(k, h, bath: BathSpec):
    """All five rates at momentum ``k`` and field ``h``.

    Scalars give a :class:`RateSet` of floats; arrays give one of arrays.
    """
    d = dispersion(k, h)
    lam = d.eps
    cos_phi = d.delta / d.eps
    sin_phi = d.xi / d.eps
    sin_2phi = 2.0 * sin_phi * cos_phi
    cj = coth_times_spectral(lam, bath)
    gamma_R = 2.0 * math.pi * cj * cos_phi**2
    gamma_phi = 8.0 * math.pi * bath.alpha / bath.beta_b * sin_phi**2
    gamma_D = gamma_phi + 0.5 * gamma_R
    gamma_zx = -math.pi * cj * sin_2phi
    gamma_xz = 4.0 * math.pi * bath.alpha / bath.beta_b * sin_2phi
    r_bar = equilibrium_rx(d.eps, bath)
    vals = (gamma_R, gamma_phi, gamma_D, gamma_zx, gamma_xz, r_bar)
    if np.ndim(lam) == 0:
        vals = tuple(float(v) for v in vals)
    return RateSet(*vals)
