from __future__ import annotations

import io
import json

import pytest

from avgctl import cli


def run(argv):
    buf = io.StringIO()
    code = cli.dispatch(argv, stdout=buf)
    return code, buf.getvalue()


def test_hamiltonian_rotating(tmp_path):
    code, out = run(["hamiltonian", "--system", "rotating_field", "--x", "0,0", "--p", "1,0", "--out", str(tmp_path)])
    assert code == 0
    assert "0.6366197" in out and "PASS" in out
    rep = json.loads((tmp_path / "hamiltonian.json").read_text())
    assert rep["schema"] == "avgctl-report-1"
    assert rep["config"]["params"]["p"] == [1.0, 0.0]
    assert len(rep["input_hash"]) == 64


def test_unknown_system_and_param_are_usage_errors(tmp_path):
    assert run(["hamiltonian", "--system", "nope", "--out", str(tmp_path)])[0] == 64
    assert run(["hamiltonian", "--system", "rotating_field", "--bogus", "1"])[0] == 64
    assert run([])[0] == 64
    assert run(["hamiltonian", "--system", "rotating_field", "--p", "a,b"])[0] == 64


def test_domain_error_exits_1(tmp_path):
    code, _ = run(["hamiltonian", "--system", "two_body_planar", "--x=-1,0,0", "--p", "1,0,0", "--out", str(tmp_path)])
    assert code == 1


def test_threshold_failure_exits_2(tmp_path, monkeypatch):
    monkeypatch.setitem(cli.RUNNERS, "hamiltonian", lambda sys, label, prm: ({"value": 0.0}, False, ["forced"], {}))
    code, out = run(["hamiltonian", "--system", "rotating_field", "--out", str(tmp_path)])
    assert code == 2 and "FAIL" in out


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"schema": "avgctl-config-1", "command": "hamiltonian",
                               "system": "rotating_field", "params": {"x": [0, 0], "p": [2, 0]}}))
    code, out = run(["hamiltonian", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == 0 and "1.273239" in out
    code, out = run(["hamiltonian", "--config", str(cfg), "--p", "0,3", "--out", str(tmp_path)])
    assert code == 0 and "1.909859" in out


def test_config_rejections(tmp_path):
    bad_key = tmp_path / "a.json"
    bad_key.write_text(json.dumps({"schema": "avgctl-config-1", "command": "hamiltonian", "extra": 1}))
    bad_schema = tmp_path / "b.json"
    bad_schema.write_text(json.dumps({"schema": "v0", "command": "hamiltonian"}))
    bad_param = tmp_path / "c.json"
    bad_param.write_text(json.dumps({"schema": "avgctl-config-1", "system": "rotating_field",
                                     "params": {"eps": 0.1}}))
    wrong_cmd = tmp_path / "d.json"
    wrong_cmd.write_text(json.dumps({"schema": "avgctl-config-1", "command": "shoot", "system": "rotating_field"}))
    for path in (bad_key, bad_schema, bad_param, wrong_cmd):
        assert run(["hamiltonian", "--config", str(path), "--system", "rotating_field"])[0] == 64
    assert run(["hamiltonian", "--config", str(tmp_path / "missing.json")])[0] == 64


def test_shoot_writes_trajectory_and_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    argv = ["shoot", "--system", "rotating_field", "--x0", "0,0", "--x1", "1,0"]
    assert run(argv + ["--out", str(a)])[0] == 0
    assert run(argv + ["--out", str(b)])[0] == 0
    files = sorted(p.name for p in a.iterdir())
    assert "shoot.json" in files and any(f.endswith(".csv") for f in files)
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    rep = json.loads((a / "shoot.json").read_text())
    assert abs(rep["results"]["T0"] - 1.5707963267948966) < 1e-6
    csv_name = next(f for f in files if f.endswith(".csv"))
    assert (a / csv_name).read_text().startswith("# schema: ")


def test_twobody_verify_small(tmp_path):
    code, out = run(["twobody-verify", "--samples", "20", "--seed", "7", "--out", str(tmp_path)])
    assert code == 0 and "histogram" in out


def test_profile_and_average_commands(tmp_path):
    assert run(["profile", "--system", "rotating_field", "--x", "0,0", "--p", "1,0", "--n", "8",
                "--out", str(tmp_path)])[0] == 0
    assert run(["average", "--system", "rotating_field", "--x", "0,0", "--T", "1", "--out", str(tmp_path)])[0] == 0
    rows = (tmp_path / "average_trajectory.csv").read_text().splitlines()
    assert rows[1].startswith("t,")


def test_main_exit_code(monkeypatch):
    monkeypatch.setattr("sys.argv", ["avgctl", "hamiltonian", "--system", "nope"])
    with pytest.raises(SystemExit) as exc:
        cli.main()
    assert exc.value.code == 64
