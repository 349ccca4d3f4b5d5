from __future__ import annotations

import hashlib
import json
import subprocess
import sys

import jsonschema
import pytest

from clickstats.cli import REPORT_SCHEMA, main


def run(*args) -> int:
    return main([str(a) for a in args])


def load(path):
    return json.loads(path.read_text())


def by_name(report):
    return {c["criterion"]: c for c in report["criteria"]}


def test_simulate_fock_onoff(tmp_path):
    out = tmp_path / "a.csv"
    assert run("simulate", "--state", "fock:1", "--detector", "onoff:eta=1", "-N", 2, "--shots", 1000, "--seed", 7,
               "--out", out) == 0
    assert out.read_text() == "N_0,N_1,count\n1,1,1000\n"
    side = load(tmp_path / "a.csv.json")
    assert side["config"]["state"] == "fock:1" and side["shots"] == 1000
    assert len(side["config_hash"]) == 64


def test_simulate_validation(tmp_path, capsys):
    out = tmp_path / "a.csv"
    assert run("simulate", "--state", "fock:1", "--detector", "onoff:eta=1", "--shots", 0, "--out", out) == 2
    assert "shots" in capsys.readouterr().err
    assert run("simulate", "--state", "coherent:x=1", "--shots", 5, "-K", 3, "--out", out) == 2
    assert "state.coherent.x" in capsys.readouterr().err
    assert run("simulate", "--state", "laser:w=1", "--shots", 5, "--out", out) == 2
    assert run("simulate", "--state", "coherent:w=1", "--shots", 5, "--out", out) == 2
    assert "K: required" in capsys.readouterr().err
    assert run("simulate", "--state", "coherent:w=1", "--detector", "onoff:eta=2", "--shots", 5, "--out", out) == 2


def test_simulate_byte_identical(tmp_path):
    out = tmp_path / "c.csv"
    args = ["simulate", "--state", "thermal:mean=1", "--detector", "photoelectric:eta=0.7", "-N", 3, "-K", 4,
            "--shots", 20000, "--seed", 5, "--shards", 3, "--exact", "--out", out]
    assert run(*args) == 0
    first = out.read_bytes(), (tmp_path / "c.csv.json").read_bytes()
    assert run(*args) == 0
    assert (out.read_bytes(), (tmp_path / "c.csv.json").read_bytes()) == first
    assert "exact_checksum" in load(tmp_path / "c.csv.json")


def test_exact_mode_and_analyze(tmp_path):
    out = tmp_path / "d.csv"
    assert run("simulate", "--state", "fock:2", "--detector", "photoelectric:eta=1", "-N", 2, "-K", 7, "--exact",
               "--out", out) == 0
    assert out.read_text().splitlines()[0].endswith(",prob")
    rep_path = tmp_path / "r.json"
    assert run("analyze", out, "--out", rep_path) == 0
    rep = load(rep_path)
    crit = by_name(rep)
    assert crit["pois"]["value"] == pytest.approx(-0.5, abs=1e-12)
    assert crit["pois"]["std_error"] == 0.0
    jsonschema.validate(rep, REPORT_SCHEMA)


def test_analyze_fock_counts_zero_variance(tmp_path):
    counts = tmp_path / "f.csv"
    run("simulate", "--state", "fock:1", "--detector", "onoff:eta=1", "-N", 2, "--shots", 5000, "--seed", 1,
        "--out", counts)
    rep_path = tmp_path / "r.json"
    before = hashlib.sha256(counts.read_bytes()).hexdigest()
    assert run("analyze", counts, "--bootstrap", 200, "--out", rep_path) == 0
    assert hashlib.sha256(counts.read_bytes()).hexdigest() == before
    rep = load(rep_path)
    jsonschema.validate(rep, REPORT_SCHEMA)
    qb = by_name(rep)["bin"]
    assert qb["value"] == -1.0 and qb["std_error"] == 0.0 and qb["verdict"] == "nonclassical"


def test_analyze_without_bootstrap_has_unknown_error(tmp_path):
    counts = tmp_path / "f.csv"
    run("simulate", "--state", "fock:1", "--detector", "onoff:eta=1", "-N", 2, "--shots", 50, "--out", counts)
    rep = tmp_path / "r.json"
    run("analyze", counts, "--out", rep)
    assert all(c["std_error"] is None for c in load(rep)["criteria"])


@pytest.mark.slow
def test_coherent_null_experiment(tmp_path):
    counts = tmp_path / "c.csv"
    assert run("simulate", "--state", "coherent:w=1", "--detector", "photoelectric:eta=0.8", "-N", 2, "-K", 7,
               "--shots", 10**6, "--seed", 21, "--out", counts) == 0
    rep_path = tmp_path / "r.json"
    assert run("analyze", counts, "--bootstrap", 200, "--seed", 3, "--out", rep_path) == 0
    for c in load(rep_path)["criteria"]:
        assert abs(c["value"]) <= 3 * c["std_error"], c["name"]
        assert c["verdict"] == "consistent-with-classical"


def test_reports_reproducible(tmp_path):
    counts = tmp_path / "c.csv"
    run("simulate", "--state", "heralded:q_sq=0.3,herald_eff=0.5,l=2", "--detector", "photoelectric:eta=0.8",
        "-K", 7, "--shots", 20000, "--seed", 2, "--out", counts)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run("analyze", counts, "--bootstrap", 100, "--criteria", "multi,bin,pois,full", "--out", a)
    run("analyze", counts, "--bootstrap", 100, "--criteria", "multi,bin,pois,full", "--out", b)
    assert a.read_bytes() == b.read_bytes()


def test_degenerate_exit_code(tmp_path):
    counts = tmp_path / "v.csv"
    counts.write_text("N_0,N_1,count\n2,0,1000\n")
    rep = tmp_path / "r.json"
    assert run("analyze", counts, "--criteria", "bin,pois", "--out", rep) == 3
    report = load(rep)
    jsonschema.validate(report, REPORT_SCHEMA)
    assert all(c["value"] is None and c["reason"] == "degenerate" for c in report["criteria"])
    # one live criterion keeps the run successful
    assert run("analyze", counts, "--criteria", "multi,bin", "--out", rep) == 0


def test_io_and_parse_errors(tmp_path, capsys):
    assert run("analyze", tmp_path / "missing.csv") == 4
    bad = tmp_path / "bad.csv"
    bad.write_text("k_1,k_2,count\n0,1,2\n1,zz,3\n")
    assert run("analyze", bad) == 2
    assert "line 3" in capsys.readouterr().err


def test_config_file_overrides(tmp_path, capsys):
    out = tmp_path / "a.csv"
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"state": "fock:1", "detector": "onoff:eta=1", "shots": 10, "out": str(out)}))
    assert run("simulate", "--state", "coherent:w=3", "--shots", 99, "--config", cfg) == 0
    assert out.read_text() == "N_0,N_1,count\n1,1,10\n"
    cfg.write_text(json.dumps({"shots": "many"}))
    assert run("simulate", "--config", cfg, "--out", out) == 2
    assert "shots" in capsys.readouterr().err
    cfg.write_text(json.dumps({"colour": 1}))
    assert run("simulate", "--config", cfg) == 2
    assert "colour" in capsys.readouterr().err


def test_heralded_simulation_reports_eta_gen(tmp_path):
    counts = tmp_path / "h.csv"
    assert run("simulate", "--state", "tmsv:q_sq=0.3,herald_eff=0.5", "--detector", "photoelectric:eta=0.8",
               "-K", 7, "--shots", 100000, "--seed", 4, "--out", counts) == 0
    rep = tmp_path / "r.json"
    assert run("analyze", counts, "--herald", 1, "--out", rep) == 0
    report = load(rep)
    jsonschema.validate(report, REPORT_SCHEMA)
    assert report["eta_gen"] == pytest.approx(0.145, abs=0.005)
    assert list(report) == ["version", "config_hash", "config", "eta_gen", "criteria"]
    assert run("analyze", counts, "--herald", 40, "--out", rep) == 2


def test_oracle_command(tmp_path):
    out = tmp_path / "o.json"
    assert run("oracle", "--state", "tmsv:q_sq=0.3,herald_eff=0.5", "--detector", "photoelectric:eta=0.8",
               "-N", 2, "-L", 3, "--out", out) == 0
    rows = load(out)["rows"]
    assert [r["l"] for r in rows] == [0, 1, 2, 3]
    assert rows[1]["herald_prob"] == pytest.approx(0.1453287197231834)
    csv_out = tmp_path / "o.csv"
    assert run("oracle", "--state", "tmsv:q_sq=0.3", "-L", 2, "--csv", "--out", csv_out) == 0
    assert csv_out.read_text().splitlines()[0] == "l,herald_prob,eta_gen,mu_mean,mu_var"
    assert run("oracle", "--state", "fock:1") == 2


def test_calibrate_command(tmp_path):
    pts = tmp_path / "p.csv"
    pts.write_text("energy,n\n" + "".join(f"{e},{2 * e * e + e}\n" for e in (0.5, 1.0, 1.5, 2.0)))
    out = tmp_path / "fit.json"
    assert run("calibrate", pts, "--out", out) == 0
    fit = load(out)["fit"]
    assert fit["a"] == pytest.approx(2, abs=1e-9) and fit["b"] == pytest.approx(1, abs=1e-9)
    r1, r2 = tmp_path / "d1.txt", tmp_path / "d2.txt"
    r1.write_text("0.1\n0.45\n0.0\n")
    r2.write_text("0.45\n0.1\n0.7\n")
    coinc = tmp_path / "c.csv"
    assert run("calibrate", pts, "--readings", r1, r2, "--edges=-1,0.25,0.6,10", "--coincidences", coinc,
               "--out", out) == 0
    assert coinc.read_text() == "N_0,N_1,N_2,count\n1,1,0,2\n1,0,1,1\n"
    assert run("calibrate", tmp_path / "nope.csv") == 4
    pts.write_text("energy,n\n1,1\n2,2\n")
    assert run("calibrate", pts) == 2


def test_report_command(tmp_path):
    counts = tmp_path / "f.csv"
    run("simulate", "--state", "fock:1", "--detector", "onoff:eta=1", "--shots", 100, "--out", counts)
    rep = tmp_path / "r.json"
    run("analyze", counts, "--bootstrap", 100, "--out", rep)
    table = tmp_path / "t.csv"
    assert run("report", rep, "--out", table) == 0
    lines = table.read_text().splitlines()
    assert lines[0] == "report,eta_gen,criterion,value,std_error,significance,verdict"
    assert len(lines) == 4


def test_console_script_entry(tmp_path):
    out = subprocess.run([sys.executable, "-m", "clickstats.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "clickstats" in out.stdout
