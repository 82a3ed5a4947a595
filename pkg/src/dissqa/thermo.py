"""Equilibrium defect densities: momentum-space PBC formulas and the open chain."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ConfigError, NumericalError
from .model import Schedule, check_chain_size, dispersion, k_values, schedule_h

ENERGY_FLOOR = -1e-12


def _check_temperature(T, name="T"):
    if not np.all(np.asarray(T) > 0):
        raise ConfigError(f"{name} must be > 0, got {T}")


def y_factor(k, h):
    """y_k = (delta sin k - xi cos k) / eps, so that the ground-state defect is 1 - y_k."""
    d = dispersion(k, h)
    return (d.delta * np.sin(k) - d.xi * np.cos(k)) / d.eps


def thermal_defects_restricted(h: float, T_b: float, N: int) -> float:
    """Pair-only sector in equilibrium with a bath at temperature ``T_b``."""
    _check_temperature(T_b, "T_b")
    N = check_chain_size(N)
    ks = k_values(N)
    eps = dispersion(ks, h).eps
    terms = 1.0 - y_factor(ks, h) * np.tanh(eps / T_b)
    return float(np.sum(terms) / N)


def thermal_defects_full(h: float, T: float, N: int) -> float:
    """All 2^N states counted, at physical temperature ``T``."""
    _check_temperature(T)
    N = check_chain_size(N)
    ks = k_values(N)
    beta = 1.0 / T
    eps = dispersion(ks, h).eps
    terms = 1.0 - y_factor(ks, h) * np.tanh(beta * eps / 2.0)
    return float(np.sum(terms) / N)


def n_therm(T):
    """Thermal defect density at h = 0: (1 - tanh(1/T)) / 2."""
    _check_temperature(T)
    val = 0.5 * (1.0 - np.tanh(1.0 / np.asarray(T, dtype=float)))
    return float(val) if np.ndim(val) == 0 else val


def thermal_defects_limit(h: float, T: float) -> float:
    """N -> infinity value of :func:`thermal_defects_full` (integral over k)."""
    import warnings

    from scipy.integrate import IntegrationWarning, quad

    _check_temperature(T)

    def integrand(k):
        eps = dispersion(k, h).eps
        return 1.0 - y_factor(k, h) * np.tanh(eps / (2.0 * T))

    with warnings.catch_warnings():
        # the integrand is analytic; quad reports roundoff once it is already at ~1e-16
        warnings.simplefilter("ignore", IntegrationWarning)
        val, _ = quad(integrand, 0.0, np.pi, epsabs=1e-15, epsrel=1e-14, limit=400)
    return val / (2.0 * np.pi)


def instantaneous_thermal_curve(schedule: Schedule, T: float, N: int, times) -> np.ndarray:
    """Equilibrium defect density along h(t) of the schedule."""
    return np.array([thermal_defects_full(schedule_h(float(t), schedule), T, N) for t in times])


# -- open chain -----------------------------------------------------------------

@dataclass(frozen=True)
class ObcSpectrum:
    """Quasiparticles eta_m = sum_i (g[m, i] c_i + hcoef[m, i] c_i^dag) with energies > 0.

    H_OBC = sum_m energies[m] (eta_m^dag eta_m - eta_m eta_m^dag).
    """

    energies: np.ndarray
    g: np.ndarray
    hcoef: np.ndarray

    def canonicity_error(self) -> float:
        """Max deviation from {eta_m, eta_m'^dag} = delta and {eta_m, eta_m'} = 0."""
        n = len(self.energies)
        a = self.g @ self.g.T + self.hcoef @ self.hcoef.T - np.eye(n)
        b = self.g @ self.hcoef.T + self.hcoef @ self.g.T
        return float(max(np.max(np.abs(a)), np.max(np.abs(b))))


def _bdg_blocks(N: int, h: float) -> tuple[np.ndarray, np.ndarray]:
    """A (symmetric) and B (antisymmetric) of H = sum c^dag A c + (c^dag B c^dag + h.c.)/2."""
    A = np.zeros((N, N))
    B = np.zeros((N, N))
    idx = np.arange(N)
    A[idx, idx] = 2.0 * h
    i = np.arange(N - 1)
    A[i, i + 1] = A[i + 1, i] = -1.0
    B[i, i + 1] = -1.0
    B[i + 1, i] = 1.0
    return A, B


def obc_diagonalize(N: int, h: float) -> ObcSpectrum:
    """Bogoliubov transformation of the open chain with N - 1 bonds.

    (A - B)(A + B) = Z Z^T with Z = A - B, so the squared problem is solved by
    the SVD of Z: left vectors give phi_m, right vectors psi_m, singular values
    the quasiparticle energies 2 * eps_m.
    """
    if int(N) != N or N < 2:
        raise ConfigError(f"open chain needs N >= 2 sites, got {N}")
    if h < 0:
        raise ConfigError(f"field must be >= 0, got {h}")
    N = int(N)
    A, B = _bdg_blocks(N, float(h))
    Z = A - B
    try:
        U, S, Vt = np.linalg.svd(Z)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge for N={N}, h={h}: cond={np.linalg.cond(Z):.3g}") from exc
    phi = U.T
    psi = Vt
    g = 0.5 * (phi + psi)
    hc = 0.5 * (phi - psi)
    flip = np.where(g.sum(axis=1) < 0, -1.0, 1.0)
    g *= flip[:, None]
    hc *= flip[:, None]
    energies = 0.5 * S
    order = np.argsort(energies, kind="stable")
    spec = ObcSpectrum(energies=energies[order], g=g[order], hcoef=hc[order])
    if np.any(spec.energies < ENERGY_FLOOR):
        raise NumericalError("negative quasiparticle energy in open-chain spectrum")
    return spec


def thermal_defects_obc(N: int, h: float, T: float, spectrum: ObcSpectrum | None = None) -> float:
    """Thermal defect density of the open chain, normalised by its N - 1 bonds."""
    _check_temperature(T)
    spec = spectrum if spectrum is not None else obc_diagonalize(N, h)
    g, hc = spec.g, spec.hcoef
    s = g[:, 1:] + hc[:, 1:]
    A_m = np.sum(g[:, :-1] * s, axis=1)
    B_m = np.sum(hc[:, :-1] * s, axis=1)
    x = 2.0 * spec.energies / T
    # f_F(x) = 1 / (1 + e^x) = expit(-x)
    occ = A_m * expit(-x) + B_m * expit(x)
    return float(0.5 - np.sum(occ) / (N - 1))
