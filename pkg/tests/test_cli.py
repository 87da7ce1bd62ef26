import json
import os
import subprocess
import sys

import numpy as np
import pytest

from mzwindow.cli import parse_angle
from mzwindow.gaussian import SqueezedSource
from mzwindow.tomography import PiezoSweepModel, PumpPowerModel, pump_variance


def run(*args, cwd=None, env=None):
    full_env = dict(os.environ)
    full_env.pop("MZWINDOW_OUT", None)
    full_env.update(env or {})
    return subprocess.run([sys.executable, "-m", "mzwindow", *map(str, args)], capture_output=True,
                          text=True, cwd=cwd, env=full_env)


def read_table(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    body = [ln.split(",") for ln in lines if not ln.startswith("#")]
    return comments, body[0], body[1:]


@pytest.mark.parametrize("text,expected", [
    ("0.1", 0.1), ("0.1rad", 0.1), ("15.7mrad", 0.0157), ("180deg", np.pi), ("-10deg", -np.pi / 18),
])
def test_parse_angle(text, expected):
    assert parse_angle(text) == pytest.approx(expected)


def test_help_lists_commands():
    res = run("--help")
    assert res.returncode == 0
    for cmd in ("response", "map", "scaling", "noise-study", "loss-map", "tomography", "simulate"):
        assert cmd in res.stdout


def test_response_outputs(tmp_path):
    res = run("response", "--alpha", "10", "--varsigma", "0.5", "--purity", "1", "--points", "11",
              "--phi-min=-10deg", "--phi-max", "10deg", "--out", tmp_path)
    assert res.returncode == 0, res.stderr
    comments, header, rows = read_table(tmp_path / "response.csv")
    assert header == ["phi", "pi_mean", "pi_std", "sigma"]
    assert len(rows) == 11
    assert float(rows[0][0]) == pytest.approx(-np.pi / 18)
    assert float(rows[5][1]) == pytest.approx(1.0)
    config = json.loads(comments[0][len("# config: "):])
    assert config["command"] == "response" and config["alpha"] == 10.0
    meta = json.loads((tmp_path / "response.meta.json").read_text())
    assert meta["table"] == "response.csv"
    assert (tmp_path / "response_plot.py").exists()


def test_response_json_format(tmp_path):
    res = run("response", "--alpha", "5", "--points", "3", "--format", "json", "--out", tmp_path)
    assert res.returncode == 0, res.stderr
    payload = json.loads((tmp_path / "response.json").read_text())
    assert len(payload["columns"]["phi"]) == 3


def test_response_monte_carlo_column(tmp_path):
    res = run("response", "--alpha", "10", "--points", "5", "--mc", "--samples", "2000", "--out", tmp_path)
    assert res.returncode == 0, res.stderr
    _, header, rows = read_table(tmp_path / "response.csv")
    assert header[-1] == "provenance"
    assert {r[-1] for r in rows} == {"monte-carlo"}


def test_flat_response_warns(tmp_path):
    res = run("response", "--alpha", "0", "--varsigma", "1", "--purity", "1", "--points", "5",
              "--out", tmp_path)
    assert res.returncode == 0
    assert "flat response" in res.stderr


def test_out_directory_from_environment(tmp_path):
    res = run("response", "--alpha", "5", "--points", "3", env={"MZWINDOW_OUT": str(tmp_path / "env")})
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "env" / "response.csv").exists()


def test_config_file(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('alpha = 7\npoints = 4\nphi-max = "5deg"\n')
    res = run("response", "--config", cfg, "--points", "6", "--out", tmp_path)
    assert res.returncode == 0, res.stderr
    comments, _, rows = read_table(tmp_path / "response.csv")
    config = json.loads(comments[0][len("# config: "):])
    assert config["alpha"] == 7.0
    assert len(rows) == 6
    assert float(rows[-1][0]) == pytest.approx(np.radians(5))


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("colour = 3\n")
    res = run("response", "--config", cfg, "--out", tmp_path)
    assert res.returncode == 2
    assert "colour" in res.stderr


def test_bad_value_exit_code(tmp_path):
    res = run("response", "--alpha", "5", "--varsigma", "2", "--out", tmp_path)
    assert res.returncode == 2
    res = run("loss-map", "--etas", "0,0.5", "--out", tmp_path)
    assert res.returncode == 2


def test_missing_input_exit_code(tmp_path):
    res = run("tomography", "--input", tmp_path / "nope.csv", "--out", tmp_path)
    assert res.returncode == 4


def test_single_cell_map(tmp_path):
    res = run("map", "--na", "1", "--ns", "1", "--purities", "1", "--out", tmp_path)
    assert res.returncode == 0, res.stderr
    _, header, rows = read_table(tmp_path / "map_p1.csv")
    assert len(rows) == 1
    _, _, lines = read_table(tmp_path / "map_p1_threshold.csv")
    assert lines == []


def test_two_point_scaling(tmp_path):
    res = run("scaling", "--alpha2s", "30,430", "--out", tmp_path)
    assert res.returncode == 0, res.stderr
    exps = json.loads((tmp_path / "scaling_exponents.json").read_text())["exponents"]
    assert exps["bin"]["n_points"] == 2
    assert exps["bin"]["stderr"] == "inf"


def test_loss_map(tmp_path):
    res = run("loss-map", "--etas", "0.3,0.5,0.7,1", "--alphas", "10", "--out", tmp_path)
    assert res.returncode == 0, res.stderr
    thr = json.loads((tmp_path / "loss_threshold.json").read_text())["eta_threshold"]
    assert 0.35 < thr["10"] < 0.65


def test_noise_study_fixed_width(tmp_path):
    res = run("noise-study", "--alphas", "5", "--w", "0", "--points", "5", "--out", tmp_path)
    assert res.returncode == 0, res.stderr
    _, header, rows = read_table(tmp_path / "noise_table.csv")
    assert header == ["scheme", "alpha_5"]
    assert all(float(r[1]) == 1.0 for r in rows)


def test_tomography_phase(tmp_path):
    truth = PiezoSweepModel(1.0, 2.0, ((0.1, 1.0, 0.1), (4.0, -1.5, 0.05), (0.3, 1.2, -0.02)),
                            SqueezedSource(0.47, 0.58))
    phi = np.linspace(0, 3, 60)
    path = tmp_path / "trace.csv"
    np.savetxt(path, np.column_stack([phi, truth.variance(phi)]), delimiter=",", header="phi,variance",
               comments="")
    res = run("tomography", "--input", path, "--out", tmp_path)
    assert res.returncode == 0, res.stderr
    fit = json.loads((tmp_path / "tomography_fit.json").read_text())["fit"]
    assert fit["source"]["varsigma"] == pytest.approx(0.47, rel=1e-3)
    assert (tmp_path / "tomography_residuals.csv").exists()


def test_tomography_pump(tmp_path):
    model = PumpPowerModel(113.73, 0.9423, 519.61)
    p = np.linspace(5, 100, 8)
    path = tmp_path / "pump.csv"
    np.savetxt(path, np.column_stack([p, 10 * np.log10(pump_variance(p, model)),
                                      10 * np.log10(pump_variance(p, model, True))]),
               delimiter=",", header="p,sq_db,asq_db", comments="")
    res = run("tomography", "--input", path, "--kind", "pump", "--out", tmp_path)
    assert res.returncode == 0, res.stderr
    params = json.loads((tmp_path / "tomography_fit.json").read_text())["fit"]["parameters"]
    assert params[0]["estimate"] == pytest.approx(113.73, rel=1e-4)


def test_simulate(tmp_path):
    res = run("simulate", "--alpha", "10", "--varsigma", "0.5", "--purity", "1", "--samples", "2000",
              "--offset", "20mrad", "--out", tmp_path)
    assert res.returncode == 0, res.stderr
    summary = json.loads((tmp_path / "simulate_summary.json").read_text())
    assert summary["fit"]["offset"] == pytest.approx(-0.02, abs=0.01)
    _, _, rows = read_table(tmp_path / "simulate.csv")
    assert len(rows) == 97
