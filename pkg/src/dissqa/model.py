"""Free-fermion description of the transverse-field Ising chain.

Units are hbar = k_B = J = 1 throughout. Each momentum pair (k, -k) of the
even-parity sector is a pseudo-spin with Hamiltonian ``xi * tau_z + delta * tau_x``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, StateError

STATE_TOL = 1e-3


@dataclass(frozen=True)
class KMode:
    n: int
    k: float


@dataclass(frozen=True)
class Dispersion:
    xi: float
    delta: float
    eps: float


@dataclass(frozen=True)
class Schedule:
    """Linear schedule h(t) = (1 - t/tau) * h0."""

    h0: float = 10.0
    tau: float = 1.0

    def __post_init__(self):
        if not self.h0 > 1.0:
            raise ConfigError(f"h0 must exceed the critical field 1, got {self.h0}")
        if not self.tau > 0.0:
            raise ConfigError(f"tau must be positive, got {self.tau}")

    @property
    def h_dot(self) -> float:
        return -self.h0 / self.tau

    @property
    def t_critical(self) -> float:
        """Time at which h(t) = 1."""
        return (1.0 - 1.0 / self.h0) * self.tau


@dataclass(frozen=True)
class RotatedFrame:
    phi: float
    phi_dot: float


def check_chain_size(N: int) -> int:
    if isinstance(N, bool) or int(N) != N:
        raise ConfigError(f"chain size must be an integer, got {N!r}")
    N = int(N)
    if N < 2 or N % 2:
        raise ConfigError(f"chain size must be even and >= 2, got {N}")
    return N


def k_values(N: int) -> np.ndarray:
    """Antiperiodic momenta k_n = pi (2n - 1) / N, n = 1..N/2, ascending."""
    N = check_chain_size(N)
    n = np.arange(1, N // 2 + 1)
    return np.pi * (2 * n - 1) / N


def k_grid(N: int) -> list[KMode]:
    return [KMode(n=i + 1, k=float(k)) for i, k in enumerate(k_values(N))]


def dispersion(k, h):
    """Return (xi, delta, eps); works elementwise on arrays."""
    xi = 2.0 * (h - np.cos(k))
    delta = 2.0 * np.sin(k)
    eps = np.sqrt(xi * xi + delta * delta)
    if np.ndim(eps) == 0:
        return Dispersion(float(xi), float(delta), float(eps))
    return Dispersion(xi, delta, eps)


def schedule_h(t: float, s: Schedule) -> float:
    if t < 0.0 or t > s.tau:
        raise DomainError(f"t={t} outside [0, tau={s.tau}]")
    if t == s.tau:
        return 0.0
    return max((1.0 - t / s.tau) * s.h0, 0.0)


def rotated_frame(k, h, h_dot):
    """Angle of the frame that maps the mode Hamiltonian onto eps * tau_x.

    With R = exp(i phi tau_y / 2) and phi = arctan(xi / delta) one has
    R^dag (xi tau_z + delta tau_x) R = eps tau_x.
    """
    d = dispersion(k, h)
    phi = np.arctan2(d.xi, d.delta)
    phi_dot = 2.0 * h_dot * d.delta / (d.eps * d.eps)
    if np.ndim(phi) == 0:
        return RotatedFrame(float(phi), float(phi_dot))
    return RotatedFrame(phi, phi_dot)


def lab_expectations(r, phi):
    """Lab-frame (<tau_x>, <tau_z>) of a rotated-frame Bloch vector."""
    r = np.asarray(r, dtype=float)
    rx, rz = r[..., 0], r[..., 2]
    c, s = np.cos(phi), np.sin(phi)
    return rx * c - rz * s, rz * c + rx * s


def mode_defect_expectation(r, phi, k, *, tol: float = STATE_TOL):
    """<1 - cos k tau_z + sin k tau_x> for rotated-frame Bloch vector ``r``.

    Vectorised over leading axes of ``r`` (last axis = (r_x, r_y, r_z)).
    Values are not clamped here; see :func:`clamp_defect`.
    """
    r = np.asarray(r, dtype=float)
    norm = np.sqrt(np.sum(r * r, axis=-1))
    if np.any(norm > 1.0 + tol):
        raise StateError(f"Bloch vector norm {float(np.max(norm))} exceeds 1 + {tol}")
    tx, tz = lab_expectations(r, phi)
    val = 1.0 - np.cos(k) * tz + np.sin(k) * tx
    return float(val) if np.ndim(val) == 0 else val


def clamp_defect(values):
    return np.clip(values, 0.0, 2.0)


def chain_defect_density(per_mode, N: int) -> float:
    """(1/N) sum over modes, accumulated in ascending-k order."""
    N = check_chain_size(N)
    vals = np.asarray(per_mode, dtype=float)
    if vals.ndim != 1 or vals.shape[0] != N // 2:
        raise ConfigError(f"expected {N // 2} per-mode values, got shape {vals.shape}")
    total = 0.0
    for v in vals:
        total += float(v)
    return total / N


def ground_state_defect(k, h):
    """Defect expectation of the instantaneous ground state, 1 - y_k."""
    d = dispersion(k, h)
    return 1.0 - (d.delta * np.sin(k) - d.xi * np.cos(k)) / d.eps
