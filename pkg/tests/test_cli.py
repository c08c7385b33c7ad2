import json
import subprocess
import sys

import pytest

from gerbeverify.cli import ConfigError, RunConfig, cmd_curvings, cmd_identities, main

FAST = ["--samples", "5", "--n", "2,3"]
FAST_INV = ["--grid", "40x80", "--su2-grid", "12", "--samples", "8", "--n", "2,3"]


def run(argv, tmp_path, name="r.json"):
    path = tmp_path / name
    code = main(argv + ["--report", str(path)])
    return code, path.read_bytes()


@pytest.mark.parametrize(
    "argv",
    [
        ["identities", "--n", "1"],
        ["identities", "--n", "2,x"],
        ["identities", "--grid", "200by400"],
        ["identities", "--tol", "h_integrality=0"],
        ["identities", "--tol", "h_integrality=-1"],
        ["identities", "--tol", "no_such_check=1e-3"],
        ["identities", "--tol", "missing_value"],
        ["identities", "--samples", "0"],
        ["identities", "--fd-step", "0"],
        ["identities", "--config", "/nonexistent/config.toml"],
        ["nonsense"],
    ],
)
def test_config_errors_exit_2(argv, capsys):
    assert main(argv) == 2


def test_bad_toml(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("seed = [unterminated\n")
    assert main(["identities", "--config", str(cfg)]) == 2
    cfg.write_text("colour = 1\n")
    assert main(["identities", "--config", str(cfg)]) == 2


def test_run_config_validation():
    with pytest.raises(ConfigError):
        RunConfig(n=(2, 1)).validate()
    with pytest.raises(ConfigError):
        RunConfig(tolerances={"delta_f_c": 0.0}).validate()
    assert RunConfig(tolerances={"all": 1e-3}).tolerance("delta_f_c") == 1e-3


def test_identities_pass(tmp_path, capsys):
    code, data = run(["identities"] + FAST, tmp_path)
    assert code == 0
    rep = json.loads(data)
    assert rep["schema"] == 1 and rep["pass"] is True
    names = {c["name"] for c in rep["checks"]}
    assert {"epsilon_cocycle", "branch_log_lemma", "h_relation", "trace_identity_distinct"} <= names
    assert "identities: PASS" in capsys.readouterr().out


def test_forced_failure(tmp_path):
    code, data = run(["identities", "--tol", "all=1e-30"] + FAST, tmp_path)
    assert code == 1
    rep = json.loads(data)
    assert rep["pass"] is False
    assert any(not c["pass"] for c in rep["checks"])


def test_seed_change_keeps_status(tmp_path):
    for seed in ("1", "99"):
        code, _ = run(["identities", "--seed", seed] + FAST, tmp_path)
        assert code == 0


def test_report_fields_and_order(tmp_path):
    _, data = run(["identities"] + FAST, tmp_path)
    rep = json.loads(data)
    assert list(rep) == ["schema", "suite", "pass", "environment", "conventions", "checks"]
    assert {"seed", "grid", "version"} <= set(rep["environment"])
    rec = rep["checks"][0]
    assert list(rec)[:7] == ["name", "anchor", "n", "samples", "max_residual", "tolerance", "pass"]
    assert "runtime" not in rec
    _, timed = run(["identities", "--timings"] + FAST, tmp_path, "t.json")
    assert all("runtime" in c for c in json.loads(timed)["checks"])


def test_report_deterministic(tmp_path, monkeypatch):
    monkeypatch.setenv("GERBEVERIFY_THREADS", "1")
    _, a = run(["curvings"] + FAST, tmp_path, "a.json")
    monkeypatch.setenv("GERBEVERIFY_THREADS", "4")
    _, b = run(["curvings"] + FAST, tmp_path, "b.json")
    _, c = run(["curvings"] + FAST, tmp_path, "c.json")
    assert a == b == c


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('n = [2]\nseed = 5\nsamples = 3\n[tolerances]\nbranch_log_lemma = 1e-11\n')
    code, data = run(["identities", "--config", str(cfg), "--seed", "7"], tmp_path)
    rep = json.loads(data)
    assert code == 0
    assert rep["environment"]["seed"] == 7
    assert rep["environment"]["n"] == [2]
    tol = [c["tolerance"] for c in rep["checks"] if c["name"] == "branch_log_lemma"]
    assert tol == [1e-11]


def test_curvings_pass(tmp_path):
    code, data = run(["curvings"] + FAST, tmp_path)
    assert code == 0
    names = {c["name"] for c in json.loads(data)["checks"]}
    assert {"delta_f_c", "delta_f_b", "contour_vs_residue", "stable_iso_relation", "omega_decomposition"} <= names


def test_fd_step_degrades_quadratically():
    def residual(h):
        rep = cmd_curvings(RunConfig(n=(3,), samples=5, fd_step=h))
        return {r.name: r for r in rep.records}

    coarse, fine = residual(1e-2), residual(1e-3)
    assert not coarse["omega_decomposition"].passed
    ratio = coarse["omega_decomposition"].max_residual / fine["omega_decomposition"].max_residual
    assert 50 < ratio < 200


def test_contour_nodes_low(tmp_path):
    code, data = run(["curvings", "--n", "2", "--samples", "5", "--contour-nodes", "256"], tmp_path)
    rec = [c for c in json.loads(data)["checks"] if c["name"] == "contour_vs_residue"][0]
    assert rec["pass"] and code == 0


def test_invariants_small_grid(tmp_path):
    code, data = run(["invariants"] + FAST_INV, tmp_path)
    rep = json.loads(data)
    assert code == 0, [c for c in rep["checks"] if not c["pass"]]
    assert rep["conventions"]["euler_orientation"] == -1
    chern = [c for c in rep["checks"] if c["name"] == "chern_tautological"][0]
    assert abs(chern["value"] + 1) <= 1e-3
    hol = [c["value"] for c in rep["checks"] if c["name"] == "holonomy_oracle"]
    assert len(hol) == 2 and abs(hol[0][1] - hol[1][1]) <= 1e-3
    assert any(c["name"] == "grid_convergence" for c in rep["checks"])


def test_every_check_once():
    rep = cmd_identities(RunConfig(n=(2, 3), samples=2))
    keys = [(r.name, r.n) for r in rep.records]
    assert len(keys) == len(set(keys))
    assert rep.passed == all(r.passed for r in rep.records)


def test_console_script():
    out = subprocess.run(
        [sys.executable, "-m", "gerbeverify.cli", "identities", "--samples", "2", "--n", "2"],
        capture_output=True, text=True,
    )
    assert out.returncode == 0
    assert "identities: PASS" in out.stdout
