from __future__ import annotations

import csv
import json
import math

import numpy as np
import pytest

from dissqa import cli
from dissqa.cli import main, parse_config
from dissqa.dynamics import EvolutionKind
from dissqa.errors import ConfigError, NumericalError


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    return rows[0], rows[1:]


def run(tmp_path, *args, name="out.csv"):
    out = tmp_path / name
    code = main([*args, "--out", str(out), "--jobs", "1"])
    return code, out


# -- configuration ---------------------------------------------------------------------

def test_defaults():
    c = parse_config({})
    assert (c["n"], c["h0"], c["omega_c"]) == (1000, 10.0, 10.0)
    assert c["kind"] is EvolutionKind.FULL and c["jobs"] >= 1


def test_flag_overrides_file(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("# chain\nn = 512\nalpha = 3e-2\nt-eff = 2 ; inline comment\n")
    c = parse_config({"n": "256"}, str(f))
    assert c["n"] == 256 and c["alpha"] == 0.03 and c["t_eff"] == 2.0


@pytest.mark.parametrize("flags,key", [({"t_eff": "0"}, "t_eff"), ({"n": "7"}, "n"),
                                       ({"n": "abc"}, "n"), ({"bogus": "1"}, "bogus"),
                                       ({"kind": "sideways"}, "kind"),
                                       ({"alphas": "1e-3,x"}, "alphas")])
def test_invalid_values_name_the_key(flags, key):
    with pytest.raises(ConfigError, match=key):
        parse_config(flags)


def test_unknown_key_in_file(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("colour = blue\n")
    with pytest.raises(ConfigError, match="colour"):
        parse_config({}, str(f))
    with pytest.raises(ConfigError):
        parse_config({}, str(tmp_path / "missing.cfg"))


@pytest.mark.parametrize("v", ["coherent", "CoherentOnly", "dissipative-only", "full"])
def test_kind_aliases(v):
    assert isinstance(parse_config({"kind": v})["kind"], EvolutionKind)


def test_seventeen_digits_round_trip():
    rng = np.random.default_rng(7)
    for x in rng.normal(size=200) * 10.0 ** rng.integers(-12, 12, size=200):
        assert float(cli.fmt(x)) == x
    assert cli.fmt(None) == "nan" and cli.fmt(3) == "3"


# -- subcommands ------------------------------------------------------------------------

def test_thermal(tmp_path):
    code, out = run(tmp_path, "thermal", "--h", "0", "--t-eff", "1")
    assert code == 0
    header, rows = read_csv(out)
    assert header == ["h", "T", "N", "n_def"] and len(rows) == 1
    assert float(rows[0][3]) == pytest.approx(0.119203, abs=5e-7)
    man = json.loads(out.with_name(out.name + ".manifest.json").read_text())
    assert man["subcommand"] == "thermal" and man["points"] == 1
    assert man["params"]["n"] == 1000 and "wall_time_s" in man and "version" in man


def test_obc_thermal(tmp_path):
    code, out = run(tmp_path, "obc-thermal", "--n", "8", "--h", "0.5", "--t-eff", "1")
    assert code == 0
    from dissqa.ed import ed_oracle_thermal
    assert float(read_csv(out)[1][0][3]) == pytest.approx(ed_oracle_thermal(8, 0.5, 1.0), abs=1e-12)


def test_sweep_tau_format(tmp_path):
    code, out = run(tmp_path, "sweep-tau", "--n", "16", "--alpha", "1e-2", "--t-eff", "1",
                    "--tau-min", "1", "--tau-max", "100", "--points-per-decade", "4")
    assert code == 0
    header, rows = read_csv(out)
    assert header == ["tau", "n_def", "kind"]
    taus = [float(r[0]) for r in rows]
    assert len(taus) == 9 and all(a < b for a, b in zip(taus, taus[1:]))
    assert {r[2] for r in rows} == {"full"}
    man = json.loads(out.with_name(out.name + ".manifest.json").read_text())
    assert man["classification"]["kind"] in ("GlobalOWP", "LocalOWP", "Monotonic")


def test_outputs_are_deterministic_and_job_independent(tmp_path):
    args = ["sweep-tau", "--n", "16", "--taus", "1,3,10,30,100,300,1000,3000", "--kind", "coherent"]
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    assert main([*args, "--out", str(a), "--jobs", "1"]) == 0
    assert main([*args, "--out", str(b), "--jobs", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert main([*args, "--out", str(b), "--jobs", "1"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_anneal_and_relax(tmp_path):
    code, out = run(tmp_path, "anneal", "--n", "16", "--tau", "5", name="a.csv")
    assert code == 0
    header, rows = read_csv(out)
    assert header == ["tau", "n_def", "kind"] and len(rows) == 1
    code, out = run(tmp_path, "relax", "--n", "16", "--h", "0.5", "--t-end", "50",
                    "--samples", "16", name="r.csv")
    assert code == 0
    header, rows = read_csv(out)
    assert header == ["t", "n_def"] and float(rows[0][0]) == 0.0


def test_additivity(tmp_path):
    code, out = run(tmp_path, "additivity", "--n", "16", "--taus", "1,10")
    assert code == 0
    header, rows = read_csv(out)
    assert header == ["tau", "n_full", "n_coh", "n_diss", "gap", "rel_gap"]
    for r in rows:
        assert float(r[4]) == pytest.approx(float(r[1]) - float(r[2]) - float(r[3]), abs=1e-15)


def test_phase_diagram(tmp_path):
    code, out = run(tmp_path, "phase-diagram", "--n", "16", "--alphas", "1e-3,1e-2",
                    "--tau-min", "1", "--tau-max", "1000", "--points-per-decade", "3",
                    "--t-min", "0.2", "--t-max", "10", "--t-tol", "0.2", "--check-convergence", "no")
    assert code == 0
    header, rows = read_csv(out)
    assert header == ["alpha", "T_up", "T_low", "T_low_resolution"] and len(rows) == 2
    for r in rows:
        T_up, T_low = float(r[1]), float(r[2])
        if not (math.isnan(T_up) or math.isnan(T_low)):
            assert T_low <= T_up


def test_usage_errors_exit_2(tmp_path, capsys):
    assert run(tmp_path, "thermal", "--t-eff", "0")[0] == 2
    assert "t_eff" in capsys.readouterr().err
    assert run(tmp_path, "anneal", "--n", "7")[0] == 2
    with pytest.raises(SystemExit) as e:
        main(["no-such-command"])
    assert e.value.code == 2


def test_numerical_failure_exit_3(tmp_path, monkeypatch, capsys):
    def boom(cfg):
        raise NumericalError("SVD did not converge")

    monkeypatch.setitem(cli.COMMANDS, "obc-thermal", boom)
    assert run(tmp_path, "obc-thermal", "--n", "8")[0] == 3
    err = capsys.readouterr().err
    assert "numerical failure" in err and len(err.strip().splitlines()) == 1


def test_atomic_write_leaves_no_temporaries(tmp_path):
    run(tmp_path, "thermal", "--h", "0.3")
    assert sorted(p.name for p in tmp_path.iterdir()) == ["out.csv", "out.csv.manifest.json"]
