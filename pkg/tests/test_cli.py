import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from severity_sde import cli
from severity_sde.config import ConfigError, validate_config
from severity_sde.errors import SolverError
from severity_sde.model import ModelParams

FIGS = Path(__file__).resolve().parent.parent / "figs"


def run(argv, capsys):
    code = cli.run_command([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write_config(tmp_path, raw, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return path


def test_panel_b_fixture_parses():
    cfg = validate_config(FIGS / "panelB.json")
    assert cfg.model == ModelParams(alpha=0.45, beta=0.45, gamma=0.01, sigma0=0.05, sigma1=0.1)


@pytest.mark.parametrize("name", ["panelA", "panelB", "panelC", "zero_drift", "strong_alignment"])
def test_all_fixtures_validate(name):
    validate_config(FIGS / f"{name}.json")


def test_sigma0_zero_names_field(tmp_path):
    raw = json.loads((FIGS / "panelA.json").read_text())
    raw["model"]["sigma0"] = 0.0
    with pytest.raises(ConfigError) as err:
        validate_config(write_config(tmp_path, raw))
    assert err.value.field == "model.sigma0"
    assert "strictly positive" in str(err.value)


def test_start_not_below_threshold_names_field(tmp_path):
    raw = json.loads((FIGS / "panelA.json").read_text())
    raw["passage"]["x_start"] = raw["passage"]["x_harm"]
    with pytest.raises(ConfigError) as err:
        validate_config(write_config(tmp_path, raw))
    assert err.value.field == "passage.x_start"


def test_config_errors_are_distinct(tmp_path):
    with pytest.raises(ConfigError) as missing:
        validate_config(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    with pytest.raises(ConfigError) as malformed:
        validate_config(bad)
    assert "not found" in str(missing.value)
    assert "malformed JSON" in str(malformed.value)
    with pytest.raises(ConfigError) as unknown:
        validate_config(write_config(tmp_path, {"model": {"alpha": 0.1, "beta": 0.1, "gamma": 0.0, "sigma0": 0.1,
                                                          "sigma1": 0.0, "delta": 1}}))
    assert unknown.value.field == "model.delta"
    with pytest.raises(ConfigError) as absent:
        validate_config(write_config(tmp_path, {"model": {"alpha": 0.1}}))
    assert absent.value.field.startswith("model.")


def test_overrides(tmp_path):
    cfg = validate_config(FIGS / "panelA.json", [("sim.seed", 9), ("model.alpha", 0.31)])
    assert cfg.sim.seed == 9 and cfg.model.alpha == 0.31


def test_certify_panel_c(tmp_path, capsys):
    code, out, _ = run(["certify", "--config", FIGS / "panelC.json", "--output_dir", tmp_path], capsys)
    assert code == 0
    summary = json.loads(out)
    assert summary["verdict"] == "RUNAWAY_SUPERCRITICAL"
    cert = json.loads((tmp_path / "certificate.json").read_text())
    assert cert["verdict"] == "RUNAWAY_SUPERCRITICAL"


def test_stationary_zero_drift_is_flat(tmp_path, capsys):
    code, _, _ = run(["stationary", "--config", FIGS / "zero_drift.json", "--output_dir", tmp_path], capsys)
    assert code == 0
    lines = (tmp_path / "stationary.csv").read_text().splitlines()
    assert lines[0].startswith("# ")
    meta = json.loads(lines[0][2:])
    assert meta["params"]["sigma0"] == 0.05
    assert lines[1] == "x,p"
    p = np.loadtxt(lines[2:], delimiter=",")[:, 1]
    assert np.max(np.abs(p - 1.0)) <= 1e-9


def test_simulate_is_byte_reproducible(tmp_path, capsys):
    outs = []
    for k, threads in enumerate((1, 1, 3)):
        d = tmp_path / f"run{k}"
        code, _, _ = run(["simulate", "--config", FIGS / "panelA.json", "--sim.seed", "42", "--sim.n_traj", "600",
                          "--sim.n_steps", "500", "--threads", threads, "--output_dir", d], capsys)
        assert code == 0
        outs.append((d / "trajectory.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]
    assert outs[0].startswith(b"traj_id,t,x\n")


def test_single_trajectory_csv(tmp_path, capsys):
    code, _, _ = run(["simulate", "--config", FIGS / "panelA.json", "--output_dir", tmp_path], capsys)
    assert code == 0
    data = np.loadtxt(tmp_path / "trajectory.csv", delimiter=",", skiprows=1)
    assert data.shape == (1001, 2)
    assert np.all((data[:, 1] >= 0) & (data[:, 1] <= 1))


def _strip_timestamp(text):
    obj = json.loads(text)
    obj.pop("generated_at", None)
    return obj


@pytest.mark.parametrize("command, filename", [
    ("evolve", "density.csv"),
    ("stationary", "stationary.csv"),
    ("mfpt", "mfpt.json"),
    ("phase-diagram", "phase.csv"),
    ("scaling", "scaling.json"),
    ("certify", "certificate.json"),
])
def test_every_output_is_reproducible(tmp_path, capsys, command, filename):
    extra = ["--grid.n_cells", "400", "--grid.n_steps", "50", "--passage.method", "both",
             "--sim.n_traj", "300", "--sim.dt", "0.01"]
    blobs = []
    for k in range(2):
        d = tmp_path / f"r{k}"
        code, out, _ = run([command, "--config", FIGS / "panelC.json", "--output_dir", d, "--threads", k + 1, *extra],
                           capsys)
        assert code == 0, out
        assert json.loads(out)["command"] == command
        blobs.append((d / filename).read_text())
    if filename == "certificate.json":
        assert _strip_timestamp(blobs[0]) == _strip_timestamp(blobs[1])
    else:
        assert blobs[0] == blobs[1]


def test_mfpt_output_layout(tmp_path, capsys):
    code, _, _ = run(["mfpt", "--config", FIGS / "panelC.json", "--output_dir", tmp_path, "--passage.method", "both",
                      "--sim.n_traj", "500", "--passage.t_max", "500"], capsys)
    assert code == 0
    res = json.loads((tmp_path / "mfpt.json").read_text())["results"]
    assert [r["method"] for r in res] == ["quadrature", "monte_carlo"]
    assert res[0]["mean_fpt"] == pytest.approx(9.60388854965209)
    assert res[1]["n_samples"] == 500


def test_simulate_then_fit_round_trip(tmp_path, capsys):
    truth = ModelParams(alpha=0.6, beta=0.4, gamma=0.01, sigma0=0.05, sigma1=0.1)
    raw = {
        "model": truth.as_dict(),
        "sim": {"dt": 0.01, "n_steps": 1000, "x0": 0.02, "seed": 5, "n_traj": 500},
        "fit": {"data": str(tmp_path / "trajectory.csv"),
                "init": {"alpha": 0.1, "beta": 0.1, "gamma": 0.1, "sigma0": 0.1, "sigma1": 0.1}},
        "output_dir": str(tmp_path),
    }
    cfg = write_config(tmp_path, raw)
    assert run(["simulate", "--config", cfg], capsys)[0] == 0
    code, out, _ = run(["fit", "--config", cfg], capsys)
    assert code == 0
    fitted = json.loads((tmp_path / "fit.json").read_text())["params"]
    for name in ("alpha", "beta", "sigma0", "sigma1"):
        assert fitted[name] == pytest.approx(getattr(truth, name), rel=0.15)
    assert abs(fitted["gamma"] - truth.gamma) <= 0.01


def test_exit_codes(tmp_path, capsys, monkeypatch):
    code, _, err = run(["bogus", "--config", FIGS / "panelA.json"], capsys)
    assert code == 1 and "usage" in err
    code, _, err = run(["certify", "--config", FIGS / "panelA.json", "--model.sigma0", "0"], capsys)
    assert code == 1 and "model.sigma0" in err
    code, _, err = run(["certify", "--config", tmp_path / "missing.json"], capsys)
    assert code == 1
    code, _, _ = run(["certify", "--config", FIGS / "panelA.json", "--passage.horizon"], capsys)
    assert code == 1
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, _, _ = run(["stationary", "--config", FIGS / "panelA.json", "--output_dir", blocker / "sub"], capsys)
    assert code == 1

    def boom(*_):
        raise SolverError("singular")

    monkeypatch.setitem(cli.HANDLERS, "stationary", boom)
    code, _, err = run(["stationary", "--config", FIGS / "panelA.json", "--output_dir", tmp_path], capsys)
    assert code == 2 and "singular" in err


def test_fit_without_data_is_a_validation_error(tmp_path, capsys):
    code, _, err = run(["fit", "--config", FIGS / "panelA.json", "--output_dir", tmp_path], capsys)
    assert code == 1 and "fit.data" in err


@pytest.mark.skipif(shutil.which("severity-sde") is None, reason="console script not installed")
def test_console_script(tmp_path):
    proc = subprocess.run(["severity-sde", "stationary", "--config", str(FIGS / "panelC.json"),
                           "--output_dir", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["modes"] == [pytest.approx(0.59825)]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "severity_sde.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "severity-sde" in proc.stdout
