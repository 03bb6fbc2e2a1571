import json
import subprocess
import sys

import numpy as np
import pytest

from sarcover import cli
from sarcover.planner import ScaOptions
from sarcover.scenario import bundled_path, serialize_scenario, default_scenario

LEFT = str(bundled_path("bs_left"))


def read_table(path):
    lines = path.read_text().splitlines()
    return lines[0].split(","), [line.split(",") for line in lines[1:]]


def run(*args):
    return cli.main([str(a) for a in args])


@pytest.fixture(scope="module")
def planned(tmp_path_factory):
    out = tmp_path_factory.mktemp("plan")
    rc = run("--scenario", LEFT, "--out", out, "--max-n", 4)
    return rc, out


def test_plan_writes_artifacts(planned):
    rc, out = planned
    assert rc == 0
    names = {p.name for p in out.iterdir()}
    assert {"trajectory.csv", "power.csv", "coverage_vs_n.csv", "summary.csv",
            "summary.json"} <= names
    header, rows = read_table(out / "trajectory.csv")
    assert header == ["slot", "x", "y", "z", "sweep"]
    assert len(rows) == 400
    y = np.array([float(r[2]) for r in rows])
    # back and forth along the strip
    assert y[0] == 0.0 and y[99] == pytest.approx(49.5)
    assert y[100] == pytest.approx(50.0) and y[199] == pytest.approx(0.5)
    assert read_table(out / "power.csv")[0] == ["slot", "p_com", "p_sar", "q"]
    header, rows = read_table(out / "coverage_vs_n.csv")
    assert header == ["n_sweeps", "coverage", "status", "sca_iterations"]
    assert [r[0] for r in rows] == ["1", "2", "3", "4"]
    doc = json.loads((out / "summary.json").read_text())
    assert doc["n_star"] == 4 and doc["audit"]["feasible"] is True
    assert doc["scenario"]["bs_position"] == [-150.0, 25.0, 25.0]


def test_numbers_use_nine_digits(planned):
    _, out = planned
    _, rows = read_table(out / "summary.csv")
    cov = rows[0][1]
    assert len(cov.replace(".", "").lstrip("0")) <= 9
    assert cli.fmt(1 / 3) == "0.333333333" and cli.fmt(True) == "true"


def test_plan_is_byte_identical(planned, tmp_path):
    _, first = planned
    assert run("--scenario", LEFT, "--out", tmp_path, "--max-n", 4) == 0
    for name in ("trajectory.csv", "power.csv", "coverage_vs_n.csv", "summary.csv",
                 "summary.json"):
        assert (tmp_path / name).read_bytes() == (first / name).read_bytes()


def test_audit_of_stored_plan(planned):
    _, out = planned
    assert run("--scenario", LEFT, "--out", out, "--command", "audit") == 0
    header, rows = read_table(out / "audit.csv")
    assert header == ["constraint", "residual", "scale", "ok"]
    assert all(r[-1] == "true" for r in rows)


def test_audit_catches_tampering(planned, tmp_path):
    _, out = planned
    for name in ("trajectory.csv", "power.csv"):
        (tmp_path / name).write_bytes((out / name).read_bytes())
    header, rows = read_table(tmp_path / "power.csv")
    rows[5][1] = "1e-9"
    (tmp_path / "power.csv").write_text(
        "\n".join([",".join(header)] + [",".join(r) for r in rows]) + "\n")
    assert run("--scenario", LEFT, "--out", tmp_path, "--command", "audit") == 1


def test_sweep_n_writes_table_only(tmp_path):
    assert run("--scenario", LEFT, "--out", tmp_path, "--command", "sweep-n",
               "--max-n", 3) == 0
    assert not (tmp_path / "trajectory.csv").exists()
    _, rows = read_table(tmp_path / "coverage_vs_n.csv")
    cov = [float(r[1]) for r in rows]
    assert cov == sorted(cov)


def test_benchmark_command(tmp_path):
    assert run("--scenario", LEFT, "--out", tmp_path, "--command", "benchmark",
               "--benchmark-scheme", 2, "--max-n", 2) == 0
    assert json.loads((tmp_path / "summary.json").read_text())["scheme"] == "fixed_comm_power"


@pytest.mark.parametrize("text", ["{not json", json.dumps({"f": "2 GHz"}),
                                  json.dumps({**json.loads(bundled_path("bs_left").read_text()),
                                              "v": "5 furlongs"})])
def test_bad_scenario_exits_2_without_artifacts(tmp_path, text):
    path = tmp_path / "bad.json"
    path.write_text(text)
    out = tmp_path / "out"
    assert run("--scenario", path, "--out", out) == 2
    assert not out.exists()


def test_missing_file_and_bad_flags(tmp_path):
    assert run("--scenario", tmp_path / "none.json", "--out", tmp_path / "o") == 2
    assert run("--scenario", LEFT, "--out", tmp_path / "o", "--epsilon", 0) == 2
    assert not (tmp_path / "o").exists()
    with pytest.raises(SystemExit):
        run("--scenario", LEFT, "--command", "fly")


def test_infeasible_exits_3(tmp_path):
    path = tmp_path / "far.json"
    serialize_scenario(default_scenario((-10000.0, 25.0, 25.0)), path)
    assert run("--scenario", path, "--out", tmp_path / "o", "--max-n", 2) == 3
    assert not (tmp_path / "o").exists()


def test_iteration_limit_exits_4_and_flags(tmp_path, monkeypatch):
    path = tmp_path / "link.json"
    serialize_scenario(default_scenario((-3000.0, 0.0, 25.0), p_com_max="8.2 W", m=2), path)
    monkeypatch.setattr(cli, "ScaOptions",
                        lambda epsilon: ScaOptions(epsilon=epsilon, max_iterations=1))
    out = tmp_path / "o"
    assert run("--scenario", path, "--out", out, "--max-n", 2, "--epsilon", 1e-9) == 4
    doc = json.loads((out / "summary.json").read_text())
    assert doc["iteration_limit"] is True and doc["status"] == "iteration_limit"
    assert (out / "trajectory.csv").exists()


def test_oracle_check(tmp_path):
    path = tmp_path / "link.json"
    serialize_scenario(default_scenario((-3000.0, 0.0, 25.0), p_com_max="8.2 W"), path)
    assert run("--scenario", path, "--out", tmp_path, "--command", "oracle-check") == 0
    header, rows = read_table(tmp_path / "oracle_check.csv")
    assert header[0] == "n_sweeps" and [r[-1] for r in rows] == ["true", "true"]


def test_help_lists_flags():
    text = subprocess.run([sys.executable, "-m", "sarcover.cli", "--help"], check=True,
                          capture_output=True, text=True).stdout
    for flag in ("--scenario", "--out", "--command", "--epsilon", "--max-n",
                 "--benchmark-scheme", "--verbose"):
        assert flag in text


def test_run_config_validation():
    with pytest.raises(cli.ConfigError):
        cli.RunConfig(scenario=LEFT, command="fly")
    with pytest.raises(cli.ConfigError):
        cli.RunConfig(scenario=LEFT, max_n=0)
    with pytest.raises(cli.ConfigError):
        cli.RunConfig(scenario=LEFT, benchmark_scheme=4)
