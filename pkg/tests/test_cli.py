import json

import pytest

from logdiff import harness
from logdiff.cli import load_run, main


@pytest.fixture(autouse=True)
def _no_env(monkeypatch):
    monkeypatch.delenv(harness.OUT_ENV, raising=False)


def test_profile_export(tmp_path):
    out = tmp_path / "psi.csv"
    assert main(["profile", "--n", "3", "--beta", "1", "--lambda", "1", "--rmax", "1e6",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "r,psi,dpsi,moment"
    assert lines[1].split(",")[:2] == ["0", "1"]


def test_profile_bad_params(tmp_path):
    assert main(["profile", "--n", "2", "--beta", "1", "--out", str(tmp_path / "x.csv")]) == 2


def test_verify_exit_code_tracks_report(tmp_path):
    for kind in ("scaling_monotonicity", "profile_asymptotics"):
        code = main(["verify", "--kind", kind, "--n", "3", "--beta", "1", "--out", str(tmp_path)])
        report = json.loads((tmp_path / kind / "report.json").read_text())
        assert code == (0 if report["passed"] else 1)


def test_verify_with_config_and_overrides(tmp_path):
    cfg = harness.ExperimentConfig("exact_barenblatt", {"refine": False}, str(tmp_path / "c"))
    path = cfg.save(tmp_path / "cfg.json")
    assert main(["verify", "--config", str(path), "--set", "t_end=0.25"]) == 0
    report = json.loads((tmp_path / "c" / "exact_barenblatt" / "report.json").read_text())
    assert report["params"]["t_end"] == 0.25
    assert report["params"]["refine"] is False


def test_env_var_overrides_config_dir(tmp_path, monkeypatch):
    cfg = harness.ExperimentConfig("nonintegrability", {}, str(tmp_path / "cfg"))
    path = cfg.save(tmp_path / "cfg.json")
    monkeypatch.setenv(harness.OUT_ENV, str(tmp_path / "env"))
    assert main(["verify", "--config", str(path)]) == 0
    assert (tmp_path / "env" / "nonintegrability" / "report.json").exists()
    assert main(["verify", "--config", str(path), "--out", str(tmp_path / "arg")]) == 0
    assert (tmp_path / "arg" / "nonintegrability" / "report.json").exists()


@pytest.mark.parametrize("argv", [
    [],
    ["verify"],
    ["verify", "--kind", "bogus"],
    ["verify", "--kind", "exact_barenblatt", "--set", "nope=1"],
    ["verify", "--kind", "exact_barenblatt", "--set", "novalue"],
    ["simulate", "--set", "scheme=\"rk4\""],
    ["frobnicate"],
])
def test_usage_errors(argv, tmp_path):
    assert main(argv + (["--out", str(tmp_path)] if argv[:1] == ["verify"] else [])) == 2


def test_simulate_and_plotdata(tmp_path):
    run = tmp_path / "run"
    assert main(["simulate", "--t-end", "0.2", "--snapshots", "0.1", "--out", str(run)]) == 0
    rows = (run / "snapshots.csv").read_text().splitlines()
    assert rows[0] == "t,r,u"
    meta = json.loads((run / "metadata.json").read_text())
    assert meta["schema"] == 1
    assert meta["config"]["t_end"] == 0.2
    assert len(meta["steps"]) == 50
    assert {"t", "dt", "newton_iters", "residual"} <= set(meta["steps"][0])

    traj = load_run(run)
    assert traj.times.tolist() == [0.0, 0.1, 0.2]

    assert main(["plotdata", "--run", str(run)]) == 0
    tidy = (run / "plot_rescaled.csv").read_text().splitlines()
    assert tidy[0] == "t,r,u,y,u_tilde,psi"
    assert len(tidy) == 1 + 3 * traj.grid.size
    assert main(["plotdata", "--run", str(run), "--what", "decay",
                 "--out", str(tmp_path / "d.csv")]) == 0
    assert (tmp_path / "d.csv").read_text().startswith("t,D,bound,ratio\n0,0,0,nan")


def test_simulate_from_config_file(tmp_path):
    cfg = {"n": 3, "beta": 1.0, "R_dom": 50.0, "t_end": 0.1,
           "initial": {"kind": "barenblatt", "k": 1.0, "T": 1.0},
           "bc": {"kind": "exact_barenblatt", "k": 1.0, "T": 1.0},
           "output_dir": str(tmp_path / "from_cfg")}
    path = tmp_path / "sim.json"
    path.write_text(json.dumps(cfg))
    assert main(["simulate", "--config", str(path)]) == 0
    assert (tmp_path / "from_cfg" / "snapshots.csv").exists()
    assert main(["plotdata", "--run", str(tmp_path / "from_cfg"), "--what", "decay"]) == 2


def test_plotdata_missing_run(tmp_path):
    assert main(["plotdata", "--run", str(tmp_path / "none")]) == 2
