import csv
import json

import numpy as np
import pytest

from nhreduce.cli import main


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_particle_simulate(tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", "--system", "particle", "--output", str(out)]) == 0
    rows = read_csv(out / "trajectory.csv")
    header = rows[0]
    assert header[:4] == ["t", "q_1", "q_2", "q_3"]
    assert header[-3:] == ["H", "J_1", "constraint_residual"]
    J = np.array([float(r[header.index("J_1")]) for r in rows[1:]])
    assert np.max(np.abs(J - J[0])) <= 1e-8
    # 17 significant digits round-trip exactly
    assert all(float(repr(float(x))) == float(x) for x in rows[5])
    summary = json.loads((out / "summary.json").read_text())
    assert summary["pass"] and summary["failing"] == []


def test_zero_final_time_single_row(tmp_path):
    out = tmp_path / "t0"
    assert main(["simulate", "--system", "particle", "--t-final", "0", "--output", str(out)]) == 0
    assert len(read_csv(out / "trajectory.csv")) == 2


def test_tight_tolerance_names_failure(tmp_path, capsys):
    out = tmp_path / "snake"
    code = main(["simulate", "--system", "snakeboard", "--tolerance", "1e-12", "--dt", "0.5",
                 "--t-final", "10", "--output", str(out)])
    assert code == 1
    summary = json.loads((out / "summary.json").read_text())
    assert "H" in summary["failing"]
    assert "exceeds tolerance" in capsys.readouterr().err


def test_verify_ball(tmp_path, capsys):
    out = tmp_path / "ball"
    assert main(["verify", "--system", "chaplygin_ball", "--level", "0.7", "--samples", "3",
                 "--output", str(out)]) == 0
    report = json.loads((out / "verify.json").read_text())
    names = {c["check"] for c in report["checks"]}
    assert "omega_mu_closed_form" in names
    assert all(c["pass"] for c in report["checks"])
    assert set(report["checks"][0]) == {"check", "samples", "max_residual", "tolerance", "pass"}
    assert "omega_mu_closed_form" in capsys.readouterr().out


def test_verify_particle_B_is_zero(capsys):
    assert main(["verify", "--system", "particle", "--checks", "B_closed_form", "--samples", "5"]) == 0
    doc = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert doc["checks"][0]["max_residual"] <= 1e-10


def test_omit_gauge_fails_basicness(capsys):
    code = main(["verify", "--system", "chaplygin_ball", "--level", "0.7", "--omit-gauge",
                 "--checks", "basic", "--samples", "3"])
    assert code == 1
    doc = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert doc["checks"][0]["max_residual"] > 1e-3


def test_reduce_and_momenta(tmp_path):
    out = tmp_path / "tables"
    assert main(["reduce", "--system", "snakeboard", "--points", "5", "--output", str(out)]) == 0
    rows = read_csv(out / "omega_mu.csv")
    assert len(rows) == 6 and rows[0][:2] == ["x_1", "p_1"]
    assert all(float(r[2]) == pytest.approx(1.0, abs=1e-7) for r in rows[1:])
    assert main(["momenta", "--system", "particle", "--points", "5", "--output", str(out)]) == 0
    rows = read_csv(out / "momenta.csv")
    assert rows[0] == ["gamma", "F_11", "A_11", "det_F"]
    for r in rows[1:]:
        y = float(r[0])
        assert float(r[2]) == pytest.approx(-y / (1 + y * y), abs=1e-6)


def test_config_file(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text(
        "[run]\nsystem = snakeboard\n\n[integrator]\ndt = 0.01\nt_final = 0.2\n\n"
        "[initial_state]\nq = 0.2, 0.1, -0.3, 0.0, 1.2\npD = 0.5, 0.3, 0.0\n"
    )
    out = tmp_path / "cfg"
    assert main(["simulate", "--config", str(ini), "--output", str(out)]) == 0
    rows = read_csv(out / "trajectory.csv")
    assert len(rows) == 22 and float(rows[1][5]) == 1.2


@pytest.mark.parametrize("argv", [
    ["simulate", "--system", "bicycle"],
    ["simulate", "--config", "/nonexistent.ini"],
    ["verify", "--system", "snakeboard", "--level", "0.7"],
    ["verify", "--system", "particle", "--checks", "nonsense"],
    ["momenta", "--system", "chaplygin_ball"],
    ["simulate", "--system", "particle", "--dt", "-1"],
    ["frobnicate"],
])
def test_config_errors_exit_2(argv, capsys):
    assert main(argv) == 2


def test_bad_ini_values(tmp_path):
    ini = tmp_path / "bad.ini"
    ini.write_text("[integrator]\ndt = fast\n")
    assert main(["simulate", "--config", str(ini)]) == 2
    ini.write_text("[params]\nm = -2\n")
    assert main(["simulate", "--config", str(ini)]) == 2
    ini.write_text("[initial_state]\nq = 1, 2\n")
    assert main(["simulate", "--config", str(ini)]) == 2


def test_deterministic_output(capsys):
    main(["verify", "--system", "particle", "--seed", "4", "--samples", "2", "--checks", "basic"])
    first = capsys.readouterr().out
    main(["verify", "--system", "particle", "--seed", "4", "--samples", "2", "--checks", "basic"])
    assert capsys.readouterr().out == first
