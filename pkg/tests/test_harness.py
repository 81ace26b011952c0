import json
import math

import numpy as np
import pytest

from logdiff import harness, pde
from logdiff.harness import ExperimentConfig, ExperimentError, run_experiment


def read_bytes(report):
    return {p: open(p, "rb").read() for p in report.files if p.endswith(".csv")}


def test_unknown_kind_and_params():
    with pytest.raises(ValueError):
        ExperimentConfig("nope")
    with pytest.raises(ValueError):
        ExperimentConfig("exact_barenblatt", {"lam": 1.0})


def test_resolved_merges_defaults():
    cfg = ExperimentConfig("theorem1_decay", {"dt": 1e-3, "bump": {"support": 0.5}})
    p = cfg.resolved()
    assert p["dt"] == 1e-3
    assert p["bump"] == {"amplitude": None, "support": 0.5, "center": 0.0}
    assert p["R_dom"] == 100.0
    # defaults table is not mutated
    assert harness.KIND_DEFAULTS["theorem1_decay"]["bump"]["support"] == 1.0


def test_output_dir_precedence(monkeypatch, tmp_path):
    cfg = ExperimentConfig("nonintegrability", output_dir=str(tmp_path / "cfg"))
    monkeypatch.delenv(harness.OUT_ENV, raising=False)
    assert cfg.out_dir() == tmp_path / "cfg" / "nonintegrability"
    monkeypatch.setenv(harness.OUT_ENV, str(tmp_path / "env"))
    assert cfg.out_dir() == tmp_path / "env" / "nonintegrability"
    assert cfg.out_dir(str(tmp_path / "arg")) == tmp_path / "arg" / "nonintegrability"
    monkeypatch.delenv(harness.OUT_ENV)
    assert ExperimentConfig("nonintegrability").out_dir().name == "nonintegrability"


def test_config_file_round_trip(tmp_path):
    cfg = ExperimentConfig("l1_contraction", {"snapshots": 25}, str(tmp_path), seed=4,
                           name="contraction_a")
    back = ExperimentConfig.load(cfg.save(tmp_path / "c.json"))
    assert back == cfg


def test_report_structure(tmp_path):
    rep = run_experiment(ExperimentConfig("scaling_monotonicity"), str(tmp_path))
    d = json.loads((tmp_path / "scaling_monotonicity" / "report.json").read_text())
    assert d["schema"] == 1
    assert d["passed"] is True and rep.passed
    assert d["params"] == harness.KIND_DEFAULTS["scaling_monotonicity"]
    for a in d["assertions"]:
        assert a["anchor"]
        assert set(a) == {"name", "anchor", "measured", "expected", "tolerance", "rule", "passed"}
    for f in d["files"]:
        assert (tmp_path / "scaling_monotonicity" / f.split("/")[-1]).exists()


def test_pde_reports_flag_boundary_convention(tmp_path):
    rep = run_experiment(ExperimentConfig("exact_barenblatt", {"refine": False}), str(tmp_path))
    assert harness.BOUNDARY_NOTE in rep.notes


@pytest.mark.parametrize("kind, params", [
    ("profile_asymptotics", {}),
    ("exact_selfsimilar", {"refine": False}),
    ("l1_contraction", {"snapshots": 20, "bump": {"center": "random"}}),
])
def test_determinism(tmp_path, kind, params):
    a = run_experiment(ExperimentConfig(kind, params, seed=3), str(tmp_path / "a"))
    b = run_experiment(ExperimentConfig(kind, params, seed=3), str(tmp_path / "b"))
    ca, cb = read_bytes(a), read_bytes(b)
    assert len(ca) >= 1
    assert list(ca.values()) == list(cb.values())


def test_seed_changes_random_perturbation(tmp_path):
    params = {"snapshots": 20, "bump": {"center": "random"}}
    a = run_experiment(ExperimentConfig("l1_contraction", params, seed=1), str(tmp_path / "a"))
    b = run_experiment(ExperimentConfig("l1_contraction", params, seed=2), str(tmp_path / "b"))
    assert list(read_bytes(a).values()) != list(read_bytes(b).values())


def test_module_errors_are_wrapped(tmp_path):
    cfg = ExperimentConfig("profile_asymptotics", {"r_max": 1e300})
    with pytest.raises(ExperimentError, match="profile_asymptotics"):
        run_experiment(cfg, str(tmp_path))


def test_check_rules():
    rep = harness.ExperimentReport("x", {}, 0)
    assert rep.check("a", "anchor", 1.01, "rel", 1.0, 0.02).passed
    assert not rep.check("b", "anchor", 1.03, "rel", 1.0, 0.02).passed
    assert rep.check("c", "anchor", 2.0, "in", [1.5, 3.0]).passed
    assert rep.check("d", "anchor", np.bool_(True), "true").passed
    assert rep.check("e", "anchor", 3, "ge", 3).passed
    assert not rep.passed
    with pytest.raises(ValueError):
        rep.check("f", "anchor", 1.0, "approx", 1.0)


def test_decay_rows_bound_values():
    seq = {"t": np.array([0.0, 1.0]), "D": np.array([0.5, 0.2])}
    rows = list(harness.decay_rows(seq, 1.0, 3))
    assert rows[0][1:] == (0.5, 0.5, 1.0)
    assert rows[1][2] / 0.5 == pytest.approx(0.367879, abs=1e-6)
    seq = {"t": np.array([0.0, 2.0]), "D": np.array([1.0, 0.04])}
    rows = list(harness.decay_rows(seq, 0.5, 5))
    assert rows[1][2] == pytest.approx(0.049787, abs=1e-6)
    assert rows[1][3] == pytest.approx(0.04 / math.exp(-3))


def test_emit_decay_table(tmp_path):
    cfg = pde.SimConfig(n=3, beta=1.0, R_dom=100.0,
                        initial=pde.InitialData("profile_bump", lam=1.0),
                        bc={"kind": "exact_self_similar", "lam": 1.0}, t_end=0.2,
                        snapshot_times=(0.1,))
    traj = pde.run(cfg)
    text = harness.emit_decay_table(traj, 1.0, 1.0, 3, tmp_path / "d.csv")
    lines = text.splitlines()
    assert lines[0] == "t,D,bound,ratio"
    t0, D0, b0, r0 = lines[1].split(",")
    assert t0 == "0" and D0 == b0 and r0 == "1"
    assert (tmp_path / "d.csv").read_text() == text
    assert len(lines) == 4


def test_suite_covers_every_kind():
    configs = harness.suite_configs(quick=True)
    assert {c.kind for c in configs} == set(harness.KINDS)
    names = [c.out_dir("x") for c in configs]
    assert len(set(names)) == len(names)
    cases = {(c.resolved()["n"], c.resolved()["beta"]) for c in configs
             if c.kind == "profile_asymptotics"}
    assert cases == {(3, 1.0), (4, 1.0), (5, 2.0)}


def test_parallel_suite_matches_sequential(tmp_path):
    configs = [ExperimentConfig("nonintegrability"), ExperimentConfig("scaling_monotonicity")]
    seq = harness.run_suite(configs=configs, out_dir=str(tmp_path / "s"))
    par = harness.run_suite(configs=configs, jobs=2, out_dir=str(tmp_path / "p"))
    assert [r.kind for r in par] == [r.kind for r in seq]
    for a, b in zip(seq, par):
        assert list(read_bytes(a).values()) == list(read_bytes(b).values())
