"""Bloch-vector dynamics of the momentum modes and chain-level drivers.

Each mode evolves in the frame rotating with its instantaneous eigenbasis,
where the ground state is r = (-1, 0, 0).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import _kernel
from .bath import BathSpec, rates
from .errors import ConfigError, IntegratorBlowup
from .model import (Schedule, check_chain_size, dispersion, k_values,
                    mode_defect_expectation, rotated_frame)
from .parallel import parallel_map

log = logging.getLogger(__name__)

GROUND = np.array([-1.0, 0.0, 0.0])
# Bloch-Redfield with the non-secular terms is not positivity preserving: |r|
# overshoots 1 by O(alpha) during fast sweeps. Only runaway growth is an error.
BLOWUP_NORM = 1.5
# classic RK4 is stable on the imaginary axis up to |lambda dt| = 2 sqrt 2
RK4_STABILITY = 2.5


class EvolutionKind(str, Enum):
    FULL = "full"
    COHERENT = "coherent"
    DISSIPATIVE = "dissipative"

    @property
    def flags(self) -> tuple[bool, bool]:
        return (self is not EvolutionKind.DISSIPATIVE, self is not EvolutionKind.COHERENT)


@dataclass(frozen=True)
class IntegratorPolicy:
    """Fixed-step RK4 settings.

    When ``check_convergence`` is on, a subsample of modes is rerun with the
    step divided by ``refine_factor``; if the extrapolated chain defect density
    moves by more than ``convergence_tol`` (relative, with absolute floor
    ``convergence_atol``) the step is refined globally and the run repeated.
    """

    dt_max: float = 1e-2
    refine_factor: int = 2
    convergence_tol: float = 1e-4
    convergence_atol: float = 1e-10
    check_convergence: bool = True
    subsample: int = 16
    max_refinements: int = 4
    max_rotation_step: float = 0.1
    norm_limit: float = BLOWUP_NORM

    def __post_init__(self):
        if not self.dt_max > 0:
            raise ConfigError(f"dt_max must be positive, got {self.dt_max}")
        if int(self.refine_factor) != self.refine_factor or self.refine_factor < 2:
            raise ConfigError(f"refine_factor must be an integer >= 2, got {self.refine_factor}")
        if not self.convergence_tol > 0:
            raise ConfigError("convergence_tol must be positive")

    def n_steps(self, t_total: float, dt: float | None = None) -> int:
        return max(1, math.ceil(t_total / (dt or self.dt_max)))

    def base_step(self, ks, h_start: float, h_end: float, t_total: float) -> float:
        """dt_max, reduced so that the frame turns by at most ``max_rotation_step`` per step."""
        rate = max_frame_rate(ks, h_start, h_end, t_total)
        if rate > 0:
            return min(self.dt_max, self.max_rotation_step / rate)
        return self.dt_max


def max_frame_rate(ks, h_start: float, h_end: float, t_total: float) -> float:
    """max |dphi/dt| over the modes and the field range of a linear sweep."""
    h_dot = (h_end - h_start) / t_total
    if h_dot == 0:
        return 0.0
    ks = np.asarray(ks, dtype=float)
    lo, hi = min(h_start, h_end), max(h_start, h_end)
    h_star = np.clip(np.cos(ks), lo, hi)
    return float(np.max(np.abs(rotated_frame(ks, h_star, h_dot).phi_dot)))


@dataclass(frozen=True)
class AnnealConfig:
    N: int = 1000
    h0: float = 10.0
    tau: float = 100.0
    alpha: float = 1e-2
    omega_c: float = 10.0
    t_eff: float = 1.0
    kind: EvolutionKind = EvolutionKind.FULL
    policy: IntegratorPolicy = field(default_factory=IntegratorPolicy)

    def __post_init__(self):
        check_chain_size(self.N)
        object.__setattr__(self, "kind", EvolutionKind(self.kind))
        self.schedule
        self.bath

    @property
    def schedule(self) -> Schedule:
        return Schedule(h0=self.h0, tau=self.tau)

    @property
    def bath(self) -> BathSpec:
        return BathSpec(alpha=self.alpha, omega_c=self.omega_c, t_eff=self.t_eff)

    def with_(self, **changes) -> "AnnealConfig":
        return replace(self, **changes)


# -- right-hand sides (reference implementations, vectorisable) -------------

def rhs_coherent(r, k, h, h_dot):
    r = np.asarray(r, dtype=float)
    lam = dispersion(k, h).eps
    phi_dot = rotated_frame(k, h, h_dot).phi_dot
    rx, ry, rz = r[..., 0], r[..., 1], r[..., 2]
    return np.stack([phi_dot * rz,
                     -2.0 * lam * rz,
                     -phi_dot * rx + 2.0 * lam * ry], axis=-1)


def rhs_dissipative(r, k, h, bath: BathSpec):
    r = np.asarray(r, dtype=float)
    g = rates(k, h, bath)
    rx, ry, rz = r[..., 0], r[..., 1], r[..., 2]
    return np.stack([-g.gamma_R * (rx - g.r_bar_x) + g.gamma_xz * rz,
                     -(g.gamma_D + g.gamma_R / 2) * ry,
                     -g.gamma_zx * (rx - g.r_bar_x) - (g.gamma_D - g.gamma_R / 2) * rz], axis=-1)


def rhs_full(r, k, h, h_dot, bath: BathSpec):
    r = np.asarray(r, dtype=float)
    lam = dispersion(k, h).eps
    phi_dot = rotated_frame(k, h, h_dot).phi_dot
    g = rates(k, h, bath)
    rx, ry, rz = r[..., 0], r[..., 1], r[..., 2]
    return np.stack([-g.gamma_R * (rx - g.r_bar_x) + (phi_dot + g.gamma_xz) * rz,
                     -(g.gamma_D + g.gamma_R / 2) * ry - 2.0 * lam * rz,
                     -phi_dot * rx - g.gamma_zx * (rx - g.r_bar_x) + 2.0 * lam * ry
                     - (g.gamma_D - g.gamma_R / 2) * rz], axis=-1)


def rhs(kind: EvolutionKind, r, k, h, h_dot, bath: BathSpec):
    kind = EvolutionKind(kind)
    if kind is EvolutionKind.FULL:
        return rhs_full(r, k, h, h_dot, bath)
    if kind is EvolutionKind.COHERENT:
        return rhs_coherent(r, k, h, h_dot)
    return rhs_dissipative(r, k, h, bath)


# -- integration --------------------------------------------------------------

@dataclass
class Trajectory:
    """Final states and optional samples of a batch of modes."""

    ks: np.ndarray
    finals: np.ndarray
    dt: float
    n_steps: int
    sample_steps: np.ndarray | None = None
    samples: np.ndarray | None = None

    @property
    def sample_times(self) -> np.ndarray | None:
        if self.sample_steps is None:
            return None
        return self.sample_steps * self.dt


def log_sample_steps(n_steps: int, n_samples: int) -> np.ndarray:
    """Step 0 plus up to n_samples - 1 log-spaced, distinct step indices ending at n_steps."""
    if n_samples < 2:
        return np.array([n_steps], dtype=np.int64)
    steps = np.round(np.geomspace(1, n_steps, n_samples - 1)).astype(np.int64)
    return np.unique(np.concatenate([[0], steps, [n_steps]])).astype(np.int64)


def _run_kernel(ks, h_start, h_end, t_total, n_steps, bath: BathSpec, kind: EvolutionKind,
                r0, sample_steps, norm_limit: float = BLOWUP_NORM) -> Trajectory:
    ks = np.ascontiguousarray(ks, dtype=float)
    coh, diss = EvolutionKind(kind).flags
    max_gap = 2.0 * (max(abs(h_start), abs(h_end)) + 1.0)
    dt = t_total / n_steps
    if coh and dt * 2.0 * max_gap > RK4_STABILITY:
        raise ConfigError(
            f"time step {dt:g} too large for the fastest precession 2*Lambda={2 * max_gap:g} "
            f"(dt * 2 Lambda = {dt * 2 * max_gap:.3g} > {RK4_STABILITY})")
    want_samples = sample_steps is not None
    steps = np.asarray(sample_steps if want_samples else [n_steps], dtype=np.int64)
    finals = np.empty((ks.shape[0], 3))
    samples = np.empty((ks.shape[0], steps.shape[0], 3))
    status = np.zeros(3)
    _kernel.integrate_modes(ks, float(h_start), float(h_end), float(t_total), int(n_steps),
                            bath.alpha, bath.omega_c, bath.beta_b, coh, diss,
                            np.asarray(r0, dtype=float), steps, norm_limit,
                            finals, samples, status)
    if status[0] >= 0:
        m, step, n2 = int(status[0]), int(status[1]), status[2]
        raise IntegratorBlowup(
            f"Bloch vector norm {math.sqrt(n2):.6g} > {norm_limit} for k={ks[m]:.6g} "
            f"at step {step} (t={step * dt:.6g}, dt={dt:g})",
            k=float(ks[m]), step=step, time=step * dt, norm=math.sqrt(n2))
    return Trajectory(ks=ks, finals=finals, dt=dt, n_steps=int(n_steps),
                      sample_steps=steps if want_samples else None,
                      samples=samples if want_samples else None)


def integrate_modes(ks, schedule: Schedule, bath: BathSpec, kind=EvolutionKind.FULL,
                    policy: IntegratorPolicy | None = None, *, dt: float | None = None,
                    sample_steps=None, r0=GROUND) -> Trajectory:
    """RK4 over the annealing schedule for every momentum in ``ks``."""
    policy = policy or IntegratorPolicy()
    dt = dt or policy.base_step(ks, schedule.h0, 0.0, schedule.tau)
    n = policy.n_steps(schedule.tau, dt)
    return _run_kernel(ks, schedule.h0, 0.0, schedule.tau, n, bath, kind, r0, sample_steps,
                       policy.norm_limit)


def integrate_mode(k: float, schedule: Schedule, bath: BathSpec, kind=EvolutionKind.FULL,
                   policy: IntegratorPolicy | None = None, *, dt: float | None = None,
                   n_samples: int | None = None):
    """Final rotated-frame Bloch vector of one mode; with ``n_samples`` also (times, states)."""
    policy = policy or IntegratorPolicy()
    steps = None
    dt = dt or policy.base_step([k], schedule.h0, 0.0, schedule.tau)
    if n_samples:
        steps = log_sample_steps(policy.n_steps(schedule.tau, dt), n_samples)
    tr = integrate_modes([k], schedule, bath, kind, policy, dt=dt, sample_steps=steps)
    if n_samples:
        return tr.finals[0], tr.sample_times, tr.samples[0]
    return tr.finals[0]


def _chunks(n: int, parts: int) -> list[slice]:
    parts = max(1, min(parts, n))
    bounds = np.linspace(0, n, parts + 1).round().astype(int)
    return [slice(bounds[i], bounds[i + 1]) for i in range(parts)]


def _kernel_task(args):
    return _run_kernel(*args)


def _run_parallel(ks, h_start, h_end, t_total, n_steps, bath, kind, r0, sample_steps, jobs,
                  norm_limit):
    if jobs <= 1 or len(ks) < 2:
        return _run_kernel(ks, h_start, h_end, t_total, n_steps, bath, kind, r0, sample_steps,
                           norm_limit)
    tasks = [(ks[s], h_start, h_end, t_total, n_steps, bath, kind, r0, sample_steps, norm_limit)
             for s in _chunks(len(ks), jobs)]
    parts = parallel_map(_kernel_task, tasks, jobs)
    out = Trajectory(ks=np.asarray(ks, dtype=float), finals=np.concatenate([p.finals for p in parts]),
                     dt=parts[0].dt, n_steps=parts[0].n_steps, sample_steps=parts[0].sample_steps)
    if sample_steps is not None:
        out.samples = np.concatenate([p.samples for p in parts])
    return out


def _final_defects(ks, finals, h_final, h_dot, norm_limit):
    phi = rotated_frame(ks, h_final, h_dot).phi
    return mode_defect_expectation(finals, phi, ks, tol=norm_limit - 1.0)


def _sum_density(per_mode, N) -> float:
    total = 0.0
    for v in per_mode:
        total += float(v)
    return total / N


@dataclass
class ChainResult:
    """Outcome of a chain evolution.

    ``per_mode`` holds the raw (unclamped) final defect expectations in
    ascending-k order; ``n_def`` is their clamped chain density.
    """

    N: int
    n_def: float
    per_mode: np.ndarray
    dt: float
    n_steps: int
    converged: bool = True
    refinements: int = 0
    times: np.ndarray | None = None
    n_def_t: np.ndarray | None = None
    finals: np.ndarray | None = None


def _evolve_chain(N, h_start, h_end, t_total, bath, kind, policy: IntegratorPolicy,
                  jobs, n_samples, r0) -> ChainResult:
    ks = k_values(N)
    h_dot = (h_end - h_start) / t_total
    dt = policy.base_step(ks, h_start, h_end, t_total)
    refinements = 0
    converged = not policy.check_convergence
    while True:
        n = policy.n_steps(t_total, dt)
        steps = log_sample_steps(n, n_samples) if n_samples else None
        tr = _run_parallel(ks, h_start, h_end, t_total, n, bath, kind, r0, steps, jobs,
                           policy.norm_limit)
        per_mode = _final_defects(ks, tr.finals, h_end, h_dot, policy.norm_limit)
        if not policy.check_convergence:
            break
        sub = np.unique(np.linspace(0, len(ks) - 1, min(policy.subsample, len(ks))).round().astype(int))
        n_fine = n * policy.refine_factor
        fine = _run_kernel(ks[sub], h_start, h_end, t_total, n_fine, bath, kind, r0, None,
                           policy.norm_limit)
        fine_defects = _final_defects(ks[sub], fine.finals, h_end, h_dot, policy.norm_limit)
        shift = abs(float(np.sum(per_mode[sub]) - np.sum(fine_defects))) * (len(ks) / len(sub)) / N
        ref = abs(_sum_density(per_mode, N))
        if shift <= policy.convergence_tol * ref + policy.convergence_atol:
            converged = True
            break
        if refinements >= policy.max_refinements:
            log.warning("step refinement limit reached: shift %.3g at dt=%g", shift, tr.dt)
            break
        log.info("chain defect shift %.3g at dt=%g; refining", shift, tr.dt)
        dt = tr.dt / policy.refine_factor
        refinements += 1
    n_def = _sum_density(np.clip(per_mode, 0.0, 2.0), N)
    res = ChainResult(N=N, n_def=n_def, per_mode=per_mode, dt=tr.dt, n_steps=tr.n_steps,
                      converged=converged, refinements=refinements, finals=tr.finals)
    if n_samples:
        times = tr.sample_times
        h_t = h_start + (h_end - h_start) * (tr.sample_steps / tr.n_steps)
        phi = rotated_frame(ks[:, None], h_t[None, :], h_dot).phi
        vals = mode_defect_expectation(tr.samples, phi, ks[:, None], tol=policy.norm_limit - 1.0)
        vals = np.clip(vals, 0.0, 2.0)
        res.times = times
        res.n_def_t = np.array([_sum_density(vals[:, j], N) for j in range(vals.shape[1])])
    return res


def anneal_chain(config: AnnealConfig, *, jobs: int = 1, n_samples: int | None = None) -> ChainResult:
    """Anneal all N/2 modes from the ground state at h0 down to h = 0.

    Deterministic: the per-mode results do not depend on ``jobs`` or on the order
    in which modes are processed, and the reduction runs in ascending k.
    """
    try:
        return _evolve_chain(config.N, config.h0, 0.0, config.tau, config.bath, config.kind,
                             config.policy, jobs, n_samples, GROUND)
    except IntegratorBlowup as exc:
        raise IntegratorBlowup(f"anneal N={config.N} tau={config.tau:g}: {exc}", k=exc.k,
                               step=exc.step, time=exc.time, norm=exc.norm) from exc


def relax_chain(h: float, bath: BathSpec, t_end: float, N: int, *, kind=EvolutionKind.FULL,
                policy: IntegratorPolicy | None = None, jobs: int = 1, n_samples: int = 512,
                r0=GROUND) -> ChainResult:
    """Evolve at fixed field ``h`` from the instantaneous ground state; returns n_def(t)."""
    if h < 0:
        raise ConfigError(f"field must be >= 0, got {h}")
    if not t_end > 0:
        raise ConfigError(f"t_end must be positive, got {t_end}")
    N = check_chain_size(N)
    policy = policy or IntegratorPolicy()
    return _evolve_chain(N, h, h, t_end, bath, EvolutionKind(kind), policy, jobs, n_samples, r0)
