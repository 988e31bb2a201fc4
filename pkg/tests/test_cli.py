import json
import subprocess
import sys

import pytest

from mfac.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_simulate_deadbeat(tmp_path, capsys):
    code, out, err = run_cli(capsys, "simulate", "--config", "ex2", "--set", "lambda=0", "--out", str(tmp_path))
    assert code == 0
    summary = json.loads((tmp_path / "ex2.summary.json").read_text())
    assert summary["rms_error"] <= 1e-9
    assert "rms_error" in out and "wrote" not in out
    assert "wrote" in err


def test_simulate_divergence_exit_code(tmp_path, capsys):
    code, _, err = run_cli(capsys, "simulate", "--config", "ex4", "--set", "lambda=0.1",
                           "--fail-on-divergence", "--out", str(tmp_path))
    assert code == 3
    assert "diverged" in err
    assert (tmp_path / "ex4.csv").exists()


def test_divergence_without_flag_succeeds(tmp_path, capsys):
    assert run_cli(capsys, "simulate", "--config", "ex4", "--set", "lambda=0.1", "--out", str(tmp_path))[0] == 0


def test_malformed_json(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"plant_id": "ex2", "horizon": 40,, }')
    code, out, err = run_cli(capsys, "simulate", "--config", str(bad))
    assert code == 2 and out == ""
    assert "horizon" in err


@pytest.mark.parametrize("override, key", [("lambda=abc", "lambda"), ("bogus=1", "bogus"), ("horizon=3", "horizon")])
def test_bad_overrides(tmp_path, capsys, override, key):
    code, _, err = run_cli(capsys, "simulate", "--config", "ex2", "--set", override, "--out", str(tmp_path))
    assert code == 2
    assert key in err


def test_env_output_directory(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("MFAC_OUT_DIR", str(tmp_path / "env"))
    assert run_cli(capsys, "simulate", "--config", "ex1_1", "--set", "horizon=20")[0] == 0
    assert (tmp_path / "env" / "ex1_1.csv").exists()


def test_figures_flag(tmp_path, capsys):
    assert run_cli(capsys, "simulate", "--config", "ex3", "--set", "lambda=0.5", "--set", "horizon=30",
                   "--out", str(tmp_path), "--figures")[0] == 0
    assert (tmp_path / "ex3.png").read_bytes()[:4] == b"\x89PNG"


def test_analyze_ex2(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "analyze", "--config", "ex2", "--set", "lambda=1", "--out", str(tmp_path))
    assert code == 0
    report = json.loads((tmp_path / "ex2_analysis.json").read_text())
    assert report["roots"] == [[pytest.approx(0.5), 0.0]]
    assert report["stable"] is True
    assert report["char_poly_q"] == [2.0, -1.0]


def test_analyze_ex4_no_poles(tmp_path, capsys):
    assert run_cli(capsys, "analyze", "--config", "ex4", "--out", str(tmp_path))[0] == 0
    report = json.loads((tmp_path / "ex4_analysis.json").read_text())
    assert report["roots"] == [] and report["stable"] is True


def test_analyze_ramp_offset(tmp_path, capsys):
    assert run_cli(capsys, "analyze", "--config", "ex1_1", "--set", "lambda=0.2", "--out", str(tmp_path))[0] == 0
    report = json.loads((tmp_path / "ex1_1_analysis.json").read_text())
    assert report["ramp_steady_state_error"] == pytest.approx(0.2, abs=1e-15)


def test_analyze_snapshot_step(tmp_path, capsys):
    assert run_cli(capsys, "analyze", "--config", "ex1", "--at-step", "120", "--out", str(tmp_path))[0] == 0
    assert json.loads((tmp_path / "ex1_analysis.json").read_text())["at_step"] == 120
    assert run_cli(capsys, "analyze", "--config", "ex1", "--at-step", "5000", "--out", str(tmp_path))[0] == 2


def test_table1(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "table1", "--out", str(tmp_path))
    assert code == 0
    rows = (tmp_path / "table1.csv").read_text().splitlines()
    assert len(rows) == 5
    for value in ("0.000000", "0.100000", "-0.100000", "0.200000"):
        assert value in out


def test_sweep_monotone(tmp_path, capsys):
    code, out, _ = run_cli(capsys, "sweep", "--config", "ex1", "--lambdas", "0,1.5,3", "--out", str(tmp_path))
    assert code == 0
    lines = (tmp_path / "ex1_sweep.csv").read_text().splitlines()[1:]
    rms = [float(line.split(",")[1]) for line in lines]
    assert rms[0] < rms[1] < rms[2]


@pytest.mark.parametrize("lambdas", ["", ",", "a,b"])
def test_sweep_bad_lambdas(tmp_path, capsys, lambdas):
    assert run_cli(capsys, "sweep", "--config", "ex1", "--lambdas", lambdas, "--out", str(tmp_path))[0] == 2


def test_unknown_verb(capsys):
    assert run_cli(capsys, "launch")[0] == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "mfac", "table1", "--out", str(tmp_path)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "0.200000" in proc.stdout
