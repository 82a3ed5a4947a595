"""Sweeps over the annealing time and what is extracted from them.

The optimal working point (OWP) of a defect curve n_def(tau) is its interior
minimum; it is *global* when it lies below the thermal plateau reached at
tau -> infinity and *local* otherwise.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .dynamics import AnnealConfig, EvolutionKind, anneal_chain
from .errors import ConfigError
from .parallel import parallel_map
from .thermo import n_therm

log = logging.getLogger(__name__)

DEFAULT_POINTS_PER_DECADE = 24
DEFAULT_CLASSIFY_TOL = 1e-3


@dataclass
class DefectCurve:
    taus: np.ndarray
    n_def: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.taus = np.asarray(self.taus, dtype=float)
        self.n_def = np.asarray(self.n_def, dtype=float)
        if self.taus.shape != self.n_def.shape or self.taus.ndim != 1:
            raise ConfigError("taus and n_def must be 1-d arrays of equal length")
        if np.any(np.diff(self.taus) <= 0):
            raise ConfigError("taus must be strictly increasing")


class OwpKind(str, Enum):
    GLOBAL = "GlobalOWP"
    LOCAL = "LocalOWP"
    MONOTONIC = "Monotonic"


@dataclass(frozen=True)
class OwpClassification:
    kind: OwpKind
    n_plateau: float
    tau_opt: float | None = None
    n_opt: float | None = None
    index: int | None = None
    # lowest sampled value and where it sits ("left", "right" or "interior")
    n_min: float | None = None
    argmin_edge: str | None = None

    @property
    def minimum_below_grid(self) -> bool:
        """No interior minimum, but the curve rises from its first point."""
        return self.n_opt is None and self.argmin_edge == "left"


def tau_grid(tau_min: float, tau_max: float, per_decade: int = DEFAULT_POINTS_PER_DECADE) -> np.ndarray:
    """Log-spaced grid with ``per_decade`` points per decade, endpoints included."""
    if not 0 < tau_min < tau_max:
        raise ConfigError(f"need 0 < tau_min < tau_max, got {tau_min}, {tau_max}")
    n = max(2, int(round(per_decade * math.log10(tau_max / tau_min))) + 1)
    return np.geomspace(tau_min, tau_max, n)


def _anneal_point(cfg: AnnealConfig) -> float:
    return anneal_chain(cfg).n_def


def sweep_tau(base: AnnealConfig, taus: Sequence[float], *, jobs: int = 1,
              min_points: int = 8) -> DefectCurve:
    """Final defect density for each annealing time (points evaluated independently)."""
    taus = np.asarray(taus, dtype=float)
    if taus.size < min_points:
        raise ConfigError(f"tau grid needs at least {min_points} points, got {taus.size}")
    if np.any(np.diff(taus) <= 0):
        raise ConfigError("tau grid must be strictly increasing")
    cfgs = [base.with_(tau=float(t)) for t in taus]
    vals = parallel_map(_anneal_point, cfgs, jobs)
    meta = dict(N=base.N, alpha=base.alpha, t_eff=base.t_eff, kind=base.kind.value, h0=base.h0)
    return DefectCurve(taus, np.array(vals), meta)


def _parabola_vertex(x, y):
    """Vertex of the parabola through three points; None if not convex."""
    (x0, x1, x2), (y0, y1, y2) = x, y
    d1 = (y1 - y0) / (x1 - x0)
    d2 = (y2 - y1) / (x2 - x1)
    a = (d2 - d1) / (x2 - x0)
    if not a > 0:
        return None
    b = d1 - a * (x0 + x1)
    xv = -b / (2 * a)
    yv = y1 + d1 * (xv - x1) + a * (xv - x0) * (xv - x1)
    return xv, yv


def local_minima(curve: DefectCurve, min_depth: float = 0.0) -> list[int]:
    n = curve.n_def
    return [i for i in range(1, len(n) - 1)
            if n[i - 1] - n[i] > min_depth and n[i + 1] - n[i] > min_depth]


def classify_curve(curve: DefectCurve, n_plateau: float, tol: float = DEFAULT_CLASSIFY_TOL,
                   *, min_depth: float = 0.0) -> OwpClassification:
    """Three-point minimum detection, refined by a parabola in log(tau).

    The deepest interior minimum is reported. ``n_plateau`` is the analytic
    large-tau value, not an estimate from the curve.
    """
    if len(curve.taus) < 3:
        raise ConfigError("classification needs at least 3 points")
    mins = local_minima(curve, min_depth)
    j = int(np.argmin(curve.n_def))
    edge = "left" if j == 0 else "right" if j == len(curve.n_def) - 1 else "interior"
    n_min = float(curve.n_def[j])
    if not mins:
        return OwpClassification(OwpKind.MONOTONIC, n_plateau, n_min=n_min, argmin_edge=edge)
    best = None
    for i in mins:
        x = np.log(curve.taus[i - 1:i + 2])
        y = curve.n_def[i - 1:i + 2]
        v = _parabola_vertex(x, y)
        if v is None or not x[0] <= v[0] <= x[2]:
            xv, yv = x[1], y[1]
        else:
            xv, yv = v
        if best is None or yv < best[1]:
            best = (xv, yv, i)
    xv, n_opt, i = best
    kind = OwpKind.GLOBAL if n_opt < n_plateau - tol else OwpKind.LOCAL
    return OwpClassification(kind, n_plateau, tau_opt=float(math.exp(xv)), n_opt=float(n_opt), index=i,
                             n_min=n_min, argmin_edge=edge)


def kz_fit(curve: DefectCurve, window: tuple[float, float] | None = None) -> tuple[float, float]:
    """Slope of log n_def against log tau and its standard error."""
    m = np.ones_like(curve.taus, dtype=bool)
    if window is not None:
        m = (curve.taus >= window[0] * (1 - 1e-12)) & (curve.taus <= window[1] * (1 + 1e-12))
    if m.sum() < 2:
        raise ConfigError("fit window contains fewer than 2 points")
    fit = stats.linregress(np.log(curve.taus[m]), np.log(curve.n_def[m]))
    return float(fit.slope), float(fit.stderr)


# -- phase boundaries -----------------------------------------------------------

@dataclass
class BoundarySearch:
    """Result of a bisection in temperature; ``value`` is None when not bracketed."""

    value: float | None
    status: str
    bracket: tuple[float, float]
    residual: float | None = None
    evaluations: list[tuple[float, float | bool]] = field(default_factory=list)

    @property
    def width(self) -> float:
        return self.bracket[1] - self.bracket[0]


def _geo_mid(a, b):
    return math.sqrt(a * b)


@dataclass
class CurveProbe:
    """Classifies the defect curve at a given temperature (memoised)."""

    base: AnnealConfig
    taus: np.ndarray
    tol: float = DEFAULT_CLASSIFY_TOL
    jobs: int = 1
    cache: dict = field(default_factory=dict)

    def __call__(self, T: float) -> OwpClassification:
        if T not in self.cache:
            curve = sweep_tau(self.base.with_(t_eff=T), self.taus, jobs=self.jobs)
            self.cache[T] = classify_curve(curve, n_therm(T), self.tol)
            c = self.cache[T]
            log.info("T=%.5g: %s n_opt=%s tau_opt=%s plateau=%.6g", T, c.kind.value, c.n_opt,
                     c.tau_opt, c.n_plateau)
        return self.cache[T]


def owp_excess(c: OwpClassification) -> float:
    """n_opt - n_plateau, +inf when there is no minimum.

    A curve rising from its first point has its minimum below the grid; the
    first value bounds n_opt from above, which fixes the sign when it lies
    below the plateau.
    """
    if c.n_opt is not None:
        return c.n_opt - c.n_plateau
    if c.minimum_below_grid and c.n_min < c.n_plateau:
        return c.n_min - c.n_plateau
    return math.inf


def has_minimum(c: OwpClassification) -> bool:
    """An interior minimum, or one lying below the smallest tau of the grid."""
    return c.n_opt is not None or c.minimum_below_grid


def find_T_up(probe: Callable[[float], OwpClassification], bracket: tuple[float, float],
              tol: float = 1e-4, *, t_rtol: float = 1e-2, max_iter: int = 30) -> BoundarySearch:
    """Temperature where n_opt(T) meets the thermal plateau n_therm(T).

    Above it the OWP is global (negative excess), below it local or absent.
    """
    lo, hi = bracket
    if not 0 < lo < hi:
        raise ConfigError(f"invalid temperature bracket {bracket}")
    f_lo, f_hi = owp_excess(probe(lo)), owp_excess(probe(hi))
    evals = [(lo, f_lo), (hi, f_hi)]
    if not (f_lo > 0 and f_hi < 0):
        return BoundarySearch(None, "not-bracketed", (lo, hi), None, evals)
    best = (hi, f_hi) if abs(f_hi) < abs(f_lo) else (lo, f_lo)
    for _ in range(max_iter):
        if abs(best[1]) <= tol or (hi - lo) <= t_rtol * lo:
            break
        mid = _geo_mid(lo, hi)
        f = owp_excess(probe(mid))
        evals.append((mid, f))
        if abs(f) < abs(best[1]):
            best = (mid, f)
        if f > 0:
            lo = mid
        else:
            hi = mid
    status = "converged" if abs(best[1]) <= tol else "bracket-resolution"
    return BoundarySearch(best[0], status, (lo, hi), best[1], evals)


def find_T_low(probe: Callable[[float], OwpClassification], bracket: tuple[float, float],
               *, t_rtol: float = 2e-2, max_iter: int = 30) -> BoundarySearch:
    """Temperature below which the curve has no minimum at grid resolution.

    Curves whose minimum lies below the smallest tau still count as having one;
    the low-temperature disappearance is the curve turning non-increasing.
    """
    lo, hi = bracket
    if not 0 < lo < hi:
        raise ConfigError(f"invalid temperature bracket {bracket}")
    has_lo = has_minimum(probe(lo))
    has_hi = has_minimum(probe(hi))
    evals = [(lo, has_lo), (hi, has_hi)]
    if has_lo:
        return BoundarySearch(None, "possibly-below-bracket", (lo, hi), None, evals)
    if not has_hi:
        return BoundarySearch(None, "above-bracket", (lo, hi), None, evals)
    for _ in range(max_iter):
        if hi - lo <= t_rtol * lo:
            break
        mid = _geo_mid(lo, hi)
        has = has_minimum(probe(mid))
        evals.append((mid, has))
        if has:
            hi = mid
        else:
            lo = mid
    return BoundarySearch(_geo_mid(lo, hi), "converged", (lo, hi), None, evals)


@dataclass
class PhaseBoundaryPoint:
    alpha: float
    T_up: float | None
    T_low: float | None
    T_up_search: BoundarySearch
    T_low_search: BoundarySearch
    points_per_decade: float

    @property
    def T_low_resolution(self) -> float | None:
        return self.T_low_search.width if self.T_low is not None else None


def phase_boundary(base: AnnealConfig, alpha: float, taus, bracket: tuple[float, float], *,
                   tol: float = 1e-4, classify_tol: float = DEFAULT_CLASSIFY_TOL,
                   t_rtol: float = 2e-2, jobs: int = 1) -> PhaseBoundaryPoint:
    """T_up and T_low for one coupling, sharing curve evaluations between the two searches."""
    taus = np.asarray(taus, dtype=float)
    probe = CurveProbe(base.with_(alpha=alpha), taus, classify_tol, jobs)
    up = find_T_up(probe, bracket, tol, t_rtol=t_rtol)
    low = find_T_low(probe, bracket, t_rtol=t_rtol)
    ppd = (len(taus) - 1) / math.log10(taus[-1] / taus[0])
    return PhaseBoundaryPoint(alpha, up.value, low.value, up, low, ppd)


@dataclass(frozen=True)
class AsymptoticFit:
    """T_up(alpha) = c / (log(1/alpha) + b); b = 0 for the one-parameter form."""

    c: float
    b: float
    residuals: np.ndarray
    rms: float

    def __call__(self, alpha):
        return self.c / (np.log(1.0 / np.asarray(alpha)) + self.b)


def fit_T_up_asymptotic(alphas, T_ups, *, with_offset: bool = False) -> AsymptoticFit:
    alphas = np.asarray(alphas, dtype=float)
    T = np.asarray(T_ups, dtype=float)
    L = np.log(1.0 / alphas)
    if with_offset:
        # 1/T = (L + b) / c is linear in L
        slope, icpt = np.polyfit(L, 1.0 / T, 1)
        c, b = 1.0 / slope, icpt / slope
    else:
        u = 1.0 / L
        c, b = float(np.dot(T, u) / np.dot(u, u)), 0.0
    res = T - c / (L + b)
    return AsymptoticFit(float(c), float(b), res, float(np.sqrt(np.mean(res**2))))


# -- additivity --------------------------------------------------------------------

@dataclass(frozen=True)
class AdditivityPoint:
    tau: float
    n_full: float
    n_coh: float
    n_diss: float

    @property
    def n_sum(self) -> float:
        return self.n_coh + self.n_diss

    @property
    def gap(self) -> float:
        return self.n_full - self.n_sum

    @property
    def rel_gap(self) -> float:
        return abs(self.gap) / self.n_full


def _additivity_point(cfg: AnnealConfig) -> AdditivityPoint:
    vals = {k: anneal_chain(cfg.with_(kind=k)).n_def for k in EvolutionKind}
    return AdditivityPoint(cfg.tau, vals[EvolutionKind.FULL], vals[EvolutionKind.COHERENT],
                           vals[EvolutionKind.DISSIPATIVE])


def additivity_gap(config: AnnealConfig, taus, *, jobs: int = 1) -> list[AdditivityPoint]:
    """Full evolution against coherent-only plus dissipative-only, per annealing time."""
    cfgs = [config.with_(tau=float(t)) for t in taus]
    return parallel_map(_additivity_point, cfgs, jobs)
