import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from compactode import scenarios
from compactode.cli import load_schema, main, run_command

REPORT = load_schema("report.schema.json")
PROBES = load_schema("probes.schema.json")
CONFIG = load_schema("config.schema.json")


def report(out):
    rep = json.loads((out / "report.json").read_text())
    jsonschema.validate(rep, REPORT)
    return rep


def write_cfg(tmp_path, cfg):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def tanh_cfg(**extra):
    cfg = {"n": 1, "d": 1, "field": ["-x1 + Gamma1"], "forcing": ["tanh(t)"], "transform": "auto"}
    cfg.update(extra)
    return cfg


def test_builtin_scenarios_validate():
    assert scenarios.names() == ["linear-tanh", "quadratic-rtip", "radial-steady"]
    for name in scenarios.names():
        jsonschema.validate(scenarios.get(name), CONFIG)


def test_scenario_list(capsys):
    assert main(["scenario", "list"]) == 0
    names = [line.split("\t")[0] for line in capsys.readouterr().out.splitlines()]
    assert names == scenarios.names()


def test_unknown_scenario(capsys):
    assert main(["scenario", "run", "nope"]) == 2


def test_check_tanh(tmp_path):
    assert main(["check", write_cfg(tmp_path, tanh_cfg()), "--out", str(tmp_path), "-q"]) == 0
    rep = report(tmp_path)
    assert rep["decay"]["+"]["cls"] == "exponential"
    assert rep["decay"]["+"]["rate"] == pytest.approx(2.0, rel=0.05)
    assert rep["transform"]["kind"] == "exp-two-sided"
    assert rep["transform"]["alpha"] == pytest.approx(1.8, rel=1e-6)
    for cond in ("one", "two"):
        assert all(r["converged"] for r in rep["conditions"][cond].values())


def test_check_bump_train(tmp_path):
    cfg = tanh_cfg(forcing=["tanh(t) + sin(t^3)/t^2"])
    assert main(["check", write_cfg(tmp_path, cfg), "--out", str(tmp_path), "-q"]) == 2
    rep = report(tmp_path)
    assert rep["status"] == "refused" and rep["error"]["type"] == "Unrecommendable"
    assert "pathological" in {d["cls"] for d in rep["decay"].values()}


def test_check_log_forcing(tmp_path):
    cfg = tanh_cfg(forcing=["ln(t)"], sides="future-only")
    assert main(["check", write_cfg(tmp_path, cfg), "--out", str(tmp_path), "-q"]) == 2
    assert report(tmp_path)["error"]["type"] == "NoLimit"


def test_check_explicit_transform_violation(tmp_path):
    cfg = tanh_cfg(transform={"kind": "exp-two-sided", "alpha": 3.0})
    assert main(["check", write_cfg(tmp_path, cfg), "--out", str(tmp_path), "-q"]) == 2
    rep = report(tmp_path)
    assert rep["error"]["type"] == "ConditionsViolated"
    assert rep["conditions"]["one"]["+"]["verdict"] == "diverges"


def test_simulate_linear(tmp_path):
    cfg = scenarios.get("linear-tanh")
    assert run_command("simulate", cfg, tmp_path, quiet=True) == 0
    rep = report(tmp_path)
    assert rep["summary"]["termination"] == "s_reached_end"
    assert rep["summary"]["state_final"][0] == pytest.approx(1.0, abs=1e-4)
    assert rep["distance_fit"]["exp_slope"] == pytest.approx(-1.0, abs=0.02)
    data = np.loadtxt(tmp_path / "trajectory.csv", delimiter=",", skiprows=1)
    assert data.shape[1] == cfg["n"] + 2


def test_simulate_on_end_subspace(tmp_path):
    cfg = write_cfg(tmp_path, scenarios.get("linear-tanh"))
    assert main(["simulate", cfg, "--x0", "0.0", "--s0", "1.0", "--out", str(tmp_path), "-q"]) == 0
    data = np.loadtxt(tmp_path / "trajectory.csv", delimiter=",", skiprows=1)
    assert np.all(data[:, 1] == 1.0)
    # frozen system x' = −x + 1
    np.testing.assert_allclose(data[:, 2], 1.0 - np.exp(-data[:, 0]), atol=1e-8)


def test_simulate_nonfinite_exit_3(tmp_path):
    cfg = tanh_cfg(field=["1/(x1 - 1) + Gamma1"], transform={"kind": "exp-two-sided", "alpha": 1.0},
                   init={"x": [1.0], "s": 0.0})
    assert main(["simulate", write_cfg(tmp_path, cfg), "--out", str(tmp_path), "-q"]) == 3
    rep = report(tmp_path)
    assert rep["status"] == "failed" and rep["error"]["type"] == "NonFiniteState"


def test_radial_equilibria(tmp_path):
    assert main(["scenario", "run", "radial-steady", "--command", "equilibria", "--out", str(tmp_path), "-q"]) == 0
    rep = report(tmp_path)
    eqs = rep["sides"]["+"]["equilibria"]
    origin = min(eqs, key=lambda e: np.hypot(*e["x"]))
    assert origin["type"] == "saddle"
    np.testing.assert_allclose(sorted(z[0] for z in origin["spectrum"]), [-2.0, 2.0], atol=1e-10)
    wells = [e for e in eqs if abs(abs(e["x"][0]) - 2.0) < 1e-8]
    assert len(wells) == 2


def test_radial_auto_transform(tmp_path):
    assert main(["scenario", "run", "radial-steady", "--command", "check", "--out", str(tmp_path), "-q"]) == 0
    tr = report(tmp_path)["transform"]
    assert tr["kind"] == "alg-right" and 0 < tr["alpha"] <= 1.0


def test_scenario_run_aliases_pullback(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["scenario", "run", "linear-tanh", "--out", str(a), "-q"]) == 0
    cfg = write_cfg(tmp_path, scenarios.get("linear-tanh"))
    assert main(["pullback", cfg, "--out", str(b), "-q"]) == 0
    assert (a / "report.json").read_text() == (b / "report.json").read_text()
    assert (a / "trajectory.csv").read_text() == (b / "trajectory.csv").read_text()
    rep = report(a)
    assert rep["result"]["verdict"] == "tracked"
    np.testing.assert_allclose(rep["result"]["final_state"], [1.0, 1.0], atol=1e-4)


def test_tip_quadratic(tmp_path, quadratic_oracle):
    r_grid, spacing = quadratic_oracle
    assert main(["scenario", "run", "quadratic-rtip", "--out", str(tmp_path), "-q"]) == 0
    rep = report(tmp_path)
    probes = json.loads((tmp_path / "probes.json").read_text())
    jsonschema.validate(probes, PROBES)
    assert probes["r_star"] == rep["r_star"]
    assert abs(rep["r_star"] - r_grid) <= 1e-4 * rep["r_star"] + spacing


def test_tip_linear_no_sign_change(tmp_path):
    assert main(["scenario", "run", "linear-tanh", "--command", "tip", "--out", str(tmp_path), "-q"]) == 2
    rep = report(tmp_path)
    assert rep["error"]["type"] == "NoSignChange"
    jsonschema.validate(json.loads((tmp_path / "probes.json").read_text()), PROBES)


@pytest.mark.parametrize("cfg,needle", [
    ({"n": 1, "d": 1, "field": ["-x1 + Gamma2"], "forcing": ["tanh(t)"]}, "Gamma2"),
    ({"n": 1, "d": 1, "field": ["-x1 +"], "forcing": ["tanh(t)"]}, "offset"),
    ({"n": 2, "d": 1, "field": ["-x1"], "forcing": ["tanh(t)"]}, "n=2"),
    ({"n": 1, "d": 1, "field": ["-x1 + Gamma1"], "forcing": ["tanh(a*t)"]}, "a"),
    ({"n": 1, "field": ["-x1"], "forcing": ["tanh(t)"]}, "d"),
])
def test_bad_configs(tmp_path, cfg, needle):
    assert main(["check", write_cfg(tmp_path, cfg), "--out", str(tmp_path), "-q"]) == 2
    rep = report(tmp_path)
    assert rep["status"] == "refused"
    assert needle in rep["error"]["message"]


def test_missing_and_invalid_files(tmp_path):
    assert main(["check", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["check", str(bad), "--out", str(tmp_path)]) == 2


def test_deterministic(tmp_path):
    cfg = scenarios.get("radial-steady")
    run_command("simulate", cfg, tmp_path / "a", quiet=True)
    run_command("simulate", cfg, tmp_path / "b", quiet=True)
    for name in ("report.json", "trajectory.csv"):
        assert (tmp_path / "a" / name).read_text() == (tmp_path / "b" / name).read_text()


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "compactode", "scenario", "list"],
                         capture_output=True, text=True, check=True)
    assert "quadratic-rtip" in out.stdout
