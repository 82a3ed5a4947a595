"""Command-line front end: ``dissqa <subcommand> [flags]``.

Every subcommand writes a CSV data file (header row, 17 significant digits)
and a ``<out>.manifest.json`` sidecar describing the run.
"""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .analysis import (additivity_gap, classify_curve, phase_boundary, sweep_tau, tau_grid)
from .bath import BathSpec
from .dynamics import AnnealConfig, EvolutionKind, IntegratorPolicy, anneal_chain, relax_chain
from .errors import ConfigError, DomainError, NumericalError, StateError
from .parallel import default_jobs
from .thermo import n_therm, thermal_defects_full, thermal_defects_obc

log = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3

SUBCOMMANDS = ("anneal", "sweep-tau", "relax", "thermal", "obc-thermal", "phase-diagram",
               "additivity")


def _float_list(s: str) -> list[float]:
    return [float(x) for x in str(s).split(",") if x.strip()]


def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(s)


@dataclass(frozen=True)
class Option:
    type: Callable[[str], Any]
    default: Any
    help: str


def _default_jobs():
    return default_jobs()


OPTIONS: dict[str, Option] = {
    "n": Option(int, 1000, "number of sites (even)"),
    "h0": Option(float, 10.0, "initial transverse field"),
    "tau": Option(float, 100.0, "annealing time"),
    "alpha": Option(float, 1e-2, "system-bath coupling"),
    "t_eff": Option(float, 1.0, "effective temperature (bath at twice this)"),
    "omega_c": Option(float, 10.0, "bath cutoff frequency"),
    "kind": Option(str, "full", "full | coherent | dissipative"),
    "dt_max": Option(float, 1e-2, "largest RK4 step"),
    "jobs": Option(int, _default_jobs, "worker processes"),
    "check_convergence": Option(_bool, True, "verify the step by halving on a mode subsample"),
    "h": Option(float, 0.0, "fixed field (relax, thermal, obc-thermal)"),
    "t_end": Option(float, 1e4, "relaxation time span"),
    "samples": Option(int, 256, "number of time samples for relax"),
    "tau_min": Option(float, 1.0, "smallest annealing time of a sweep"),
    "tau_max": Option(float, 1e4, "largest annealing time of a sweep"),
    "points_per_decade": Option(int, 24, "sweep grid density"),
    "taus": Option(_float_list, None, "explicit comma-separated annealing times"),
    "alphas": Option(_float_list, [1e-3, 1e-2], "comma-separated couplings (phase-diagram)"),
    "t_min": Option(float, 0.2, "lower end of the temperature bracket"),
    "t_max": Option(float, 5.0, "upper end of the temperature bracket"),
    "t_tol": Option(float, 2e-2, "relative temperature resolution of the bisections"),
    "owp_tol": Option(float, 1e-4, "tolerance |n_opt - n_therm| for T_up"),
    "out": Option(str, None, "output CSV path (default <subcommand>.csv)"),
}


def _kind(v: str) -> EvolutionKind:
    aliases = {"full": EvolutionKind.FULL, "coherent": EvolutionKind.COHERENT,
               "dissipative": EvolutionKind.DISSIPATIVE}
    key = str(v).strip().lower().replace("_", "").replace("-", "").replace("only", "")
    if key not in aliases:
        try:
            return EvolutionKind(v)
        except ValueError:
            raise ConfigError(f"kind: unknown evolution kind {v!r}") from None
    return aliases[key]


def read_config_file(path: str | os.PathLike) -> dict[str, str]:
    """Flat ``key = value`` file; '#' and ';' start comments."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from exc
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string("[top]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"config: malformed file {path}: {exc}") from exc
    return {k.replace("-", "_"): v for k, v in cp["top"].items()}


def parse_config(flags: dict[str, Any] | None = None, config_file: str | None = None) -> dict[str, Any]:
    """Resolve parameters: explicit flags, then config file values, then defaults."""
    raw: dict[str, Any] = {}
    if config_file:
        raw.update(read_config_file(config_file))
    raw.update({k.replace("-", "_"): v for k, v in (flags or {}).items() if v is not None})
    resolved: dict[str, Any] = {}
    for key, value in raw.items():
        if key not in OPTIONS:
            raise ConfigError(f"{key}: unknown configuration key")
        try:
            resolved[key] = OPTIONS[key].type(value) if isinstance(value, str) else value
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: invalid value {value!r}") from None
    for key, opt in OPTIONS.items():
        if key not in resolved:
            resolved[key] = opt.default() if callable(opt.default) else opt.default
    _validate(resolved)
    return resolved


def _validate(c: dict[str, Any]) -> None:
    n = c["n"]
    if n < 2 or n % 2:
        raise ConfigError(f"n: chain size must be even and >= 2, got {n}")
    for key in ("t_eff", "tau", "omega_c", "dt_max", "t_end", "tau_min", "tau_max", "t_min",
                "t_max", "t_tol", "owp_tol"):
        v = c[key]
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise ConfigError(f"{key}: must be a positive number, got {v}")
    if c["alpha"] < 0:
        raise ConfigError(f"alpha: must be >= 0, got {c['alpha']}")
    if c["h0"] <= 1:
        raise ConfigError(f"h0: must exceed 1, got {c['h0']}")
    if c["h"] < 0:
        raise ConfigError(f"h: must be >= 0, got {c['h']}")
    if c["jobs"] < 1:
        raise ConfigError(f"jobs: must be >= 1, got {c['jobs']}")
    if c["samples"] < 2 or c["points_per_decade"] < 1:
        raise ConfigError("samples and points_per_decade must be positive")
    if c["tau_min"] >= c["tau_max"]:
        raise ConfigError("tau_min: must be below tau_max")
    if c["t_min"] >= c["t_max"]:
        raise ConfigError("t_min: must be below t_max")
    if not c["alphas"] or any(a <= 0 for a in c["alphas"]):
        raise ConfigError("alphas: need a non-empty list of positive couplings")
    if c["taus"] is not None and (len(c["taus"]) == 0 or any(t <= 0 for t in c["taus"])):
        raise ConfigError("taus: need positive annealing times")
    c["kind"] = _kind(c["kind"])


# -- output -----------------------------------------------------------------------

def fmt(x) -> str:
    if x is None:
        return "nan"
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.17g}"


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


@dataclass
class RunOutput:
    header: list[str]
    rows: list[list[Any]]
    dt_used: Any = None
    extra: dict = field(default_factory=dict)


def _jsonable(v):
    if isinstance(v, EvolutionKind):
        return v.value
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def write_outputs(name: str, cfg: dict, out: RunOutput, wall: float) -> Path:
    path = Path(cfg["out"] or f"{name}.csv")
    atomic_write(path, csv_text(out.header, out.rows))
    manifest = {
        "subcommand": name,
        "params": {k: v for k, v in cfg.items() if k != "out"},
        "version": __version__,
        "wall_time_s": wall,
        "dt_used": out.dt_used,
        "points": len(out.rows),
        "columns": out.header,
        **out.extra,
    }
    atomic_write(path.with_name(path.name + ".manifest.json"),
                 json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    return path


# -- subcommands ------------------------------------------------------------------

def _policy(c) -> IntegratorPolicy:
    return IntegratorPolicy(dt_max=c["dt_max"], check_convergence=c["check_convergence"])


def _anneal_config(c) -> AnnealConfig:
    return AnnealConfig(N=c["n"], h0=c["h0"], tau=c["tau"], alpha=c["alpha"], omega_c=c["omega_c"],
                        t_eff=c["t_eff"], kind=c["kind"], policy=_policy(c))


def _taus(c) -> np.ndarray:
    if c["taus"] is not None:
        return np.array(sorted(set(c["taus"])))
    return tau_grid(c["tau_min"], c["tau_max"], c["points_per_decade"])


def cmd_anneal(c) -> RunOutput:
    res = anneal_chain(_anneal_config(c), jobs=c["jobs"])
    return RunOutput(["tau", "n_def", "kind"], [[c["tau"], res.n_def, c["kind"].value]],
                     dt_used=res.dt, extra={"n_steps": res.n_steps, "converged": res.converged})


def cmd_sweep_tau(c) -> RunOutput:
    taus = _taus(c)
    curve = sweep_tau(_anneal_config(c), taus, jobs=c["jobs"], min_points=min(8, len(taus)))
    plateau = n_therm(c["t_eff"])
    cls = classify_curve(curve, plateau)
    rows = [[t, n, c["kind"].value] for t, n in zip(curve.taus, curve.n_def)]
    extra = {"classification": {"kind": cls.kind.value, "tau_opt": cls.tau_opt, "n_opt": cls.n_opt,
                                "n_plateau": plateau,
                                "criterion": "interior three-point minimum at grid resolution"}}
    return RunOutput(["tau", "n_def", "kind"], rows, dt_used=c["dt_max"], extra=extra)


def cmd_relax(c) -> RunOutput:
    bath = BathSpec(alpha=c["alpha"], omega_c=c["omega_c"], t_eff=c["t_eff"])
    res = relax_chain(c["h"], bath, c["t_end"], c["n"], kind=c["kind"], policy=_policy(c),
                      jobs=c["jobs"], n_samples=c["samples"])
    rows = [[t, n] for t, n in zip(res.times, res.n_def_t)]
    ref = thermal_defects_full(c["h"], c["t_eff"], c["n"])
    return RunOutput(["t", "n_def"], rows, dt_used=res.dt, extra={"thermal_reference": ref})


def cmd_thermal(c) -> RunOutput:
    n = thermal_defects_full(c["h"], c["t_eff"], c["n"])
    return RunOutput(["h", "T", "N", "n_def"], [[c["h"], c["t_eff"], c["n"], n]])


def cmd_obc_thermal(c) -> RunOutput:
    n = thermal_defects_obc(c["n"], c["h"], c["t_eff"])
    return RunOutput(["h", "T", "N", "n_def"], [[c["h"], c["t_eff"], c["n"], n]])


def cmd_phase_diagram(c) -> RunOutput:
    taus = _taus(c)
    base = _anneal_config(c)
    rows, details = [], []
    for a in c["alphas"]:
        p = phase_boundary(base, a, taus, (c["t_min"], c["t_max"]), tol=c["owp_tol"],
                           t_rtol=c["t_tol"], jobs=c["jobs"])
        if p.T_up is not None and p.T_low is not None and p.T_low > p.T_up:
            log.warning("alpha=%g: T_low %.4g above T_up %.4g", a, p.T_low, p.T_up)
        rows.append([a, p.T_up, p.T_low, p.T_low_resolution])
        details.append({"alpha": a, "T_up_status": p.T_up_search.status,
                        "T_up_residual": p.T_up_search.residual,
                        "T_up_bracket": list(p.T_up_search.bracket),
                        "T_low_status": p.T_low_search.status,
                        "T_low_bracket": list(p.T_low_search.bracket)})
    extra = {"boundaries": details, "points_per_decade": (len(taus) - 1) / math.log10(taus[-1] / taus[0]),
             "T_low_criterion": "no interior three-point minimum on the tau grid"}
    return RunOutput(["alpha", "T_up", "T_low", "T_low_resolution"], rows, dt_used=c["dt_max"],
                     extra=extra)


def cmd_additivity(c) -> RunOutput:
    pts = additivity_gap(_anneal_config(c), _taus(c), jobs=c["jobs"])
    rows = [[p.tau, p.n_full, p.n_coh, p.n_diss, p.gap, p.rel_gap] for p in pts]
    return RunOutput(["tau", "n_full", "n_coh", "n_diss", "gap", "rel_gap"], rows,
                     dt_used=c["dt_max"])


COMMANDS: dict[str, Callable[[dict], RunOutput]] = {
    "anneal": cmd_anneal,
    "sweep-tau": cmd_sweep_tau,
    "relax": cmd_relax,
    "thermal": cmd_thermal,
    "obc-thermal": cmd_obc_thermal,
    "phase-diagram": cmd_phase_diagram,
    "additivity": cmd_additivity,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dissqa", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="flat key = value parameter file")
    for key, opt in OPTIONS.items():
        # SUPPRESS keeps unset flags out of the namespace so the file can fill them
        common.add_argument("--" + key.replace("_", "-"), dest=key, default=argparse.SUPPRESS,
                            help=opt.help)
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=COMMANDS[name].__name__[4:].replace("_", "-"))
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    name = args.pop("command")
    verbose = args.pop("verbose")
    config_file = args.pop("config")
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args, config_file)
        t0 = time.perf_counter()
        out = COMMANDS[name](cfg)
        path = write_outputs(name, cfg, out, time.perf_counter() - t0)
    except (ConfigError, DomainError) as exc:
        print(f"dissqa {name}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, StateError) as exc:
        print(f"dissqa {name}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
