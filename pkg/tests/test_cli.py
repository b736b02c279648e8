import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from fracwell.cli import OUTPUT_DIR_ENV, main
from fracwell.grid import GridFunction, make_grid, read_csv, write_csv


@pytest.fixture
def constant_csv(tmp_path):
    path = tmp_path / "const.csv"
    write_csv(GridFunction(make_grid(0, 1, 65), np.full(65, 2.5)), path)
    return path


@pytest.fixture
def ramp_csv(tmp_path):
    g = make_grid(0, 1, 101)
    path = tmp_path / "ramp.csv"
    write_csv(GridFunction(g, np.tanh((g.nodes - 0.5) / 0.1)), path)
    return path


def summary(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_profile_command(tmp_path, capsys):
    out = tmp_path / "m.csv"
    code = main(["profile", "--k", "1", "--s", "0", "--well", "quartic", "--T", "10", "--grid-n", "2001", "--out", str(out)])
    assert code == 0
    rows = read_rows(out)
    assert len(rows) == 1
    assert abs(float(rows[0]["m_hat"]) - 8 / 3) <= 0.01 * 8 / 3
    assert rows[0]["converged"] == "True"
    assert summary(capsys)["command"] == "profile"


def test_seminorm_of_constant_is_zero(constant_csv, tmp_path):
    out = tmp_path / "semi.csv"
    assert main(["seminorm", "--k", "0", "--s", "0.75", "--input", str(constant_csv), "--out", str(out)]) == 0
    assert float(read_rows(out)[0]["seminorm"]) == 0.0


def test_order_at_most_half_is_rejected(capsys):
    assert main(["profile", "--k", "0", "--s", "0.4"]) == 1
    err = capsys.readouterr().err
    assert "--k/--s" in err and "1/2" in err


@pytest.mark.parametrize(
    "argv,flag",
    [
        (["seminorm", "--k", "1"], "--input"),
        (["sweep-s", "--k", "1"], "--s-list"),
        (["sweep-T", "--k", "1", "--T-list", "10,5"], "--T-list"),
        (["recovery", "--k", "1"], "--jumps"),
        (["transitions", "--input", "nope.csv"], "--input"),
        (["check-interp", "--k", "1", "--s", "0.5", "--ell", "2"], "--ell"),
        (["check-l2", "--s", "0"], "--s"),
        (["profile", "--k", "1", "--well", "missing.csv"], "--well"),
        (["profile", "--k", "banana"], "usage"),
        (["frobnicate"], "usage"),
    ],
)
def test_invalid_input_exits_with_one(argv, flag, capsys):
    assert main(argv) == 1
    assert flag in capsys.readouterr().err


def test_numerical_failure_exits_with_two(tmp_path, capsys):
    g = make_grid(0, 1, 21)
    path = tmp_path / "u.csv"
    write_csv(GridFunction(g, g.nodes), path)
    out = tmp_path / "never.csv"
    code = main(["minimize", "--k", "1", "--s", "0.4", "--tail-T", "2", "--input", str(path), "--out", str(out)])
    assert code == 2
    assert "non-finite" in capsys.readouterr().err
    assert not out.exists()


def test_energy_and_minimize_round_trip(ramp_csv, tmp_path, capsys):
    out = tmp_path / "e.json"
    assert main(["energy", "--k", "1", "--s", "0.5", "--eps", "0.1", "--input", str(ramp_csv),
                 "--format", "json", "--out", str(out)]) == 0
    rows = json.loads(out.read_text())
    assert set(rows[0]) == {"eps", "total", "well", "seminorm", "forcing"}
    before = rows[0]["total"]
    mini = tmp_path / "u.csv"
    assert main(["minimize", "--k", "1", "--s", "0.5", "--eps", "0.1", "--pads", "2", "--max-iters", "200",
                 "--input", str(ramp_csv), "--out", str(mini)]) == 0
    info = summary(capsys)
    assert info["total"] < before
    u = read_csv(mini)
    assert u.values[0] == -1.0 and u.values[-1] == 1.0


def test_csv_and_json_carry_the_same_rows(tmp_path):
    args = ["sweep-s", "--k", "1", "--s-list", "0.25,0.5", "--T", "5", "--grid-n", "201"]
    assert main([*args, "--out", str(tmp_path / "a.csv")]) == 0
    assert main([*args, "--format", "json", "--out", str(tmp_path / "a.json")]) == 0
    from_csv = read_rows(tmp_path / "a.csv")
    from_json = json.loads((tmp_path / "a.json").read_text())
    assert [list(r) for r in from_csv] == [list(r) for r in from_json]
    for c, j in zip(from_csv, from_json):
        assert float(c["m_hat"]) == j["m_hat"]


def test_seeded_output_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert main(["check-interp", "--k", "2", "--s", "0.5", "--samples", "10", "--seed", "4",
                     "--grid-n", "257", "--format", "json", "--out", str(tmp_path / f"{name}.json")]) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    report = json.loads((tmp_path / "a.json").read_text())
    assert set(report) == {"order", "ell", "samples", "seed", "max_ratio"}


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"command": "check-l2", "s": 0.75, "samples": 5, "grid-n": 129, "seed": 1}))
    assert main(["--config", str(cfg), "--out", str(tmp_path / "c.csv")]) == 0
    row = read_rows(tmp_path / "c.csv")[0]
    assert float(row["s"]) == 0.75 and row["samples"] == "5"
    assert main(["check-l2", "--config", str(cfg), "--samples", "7", "--out", str(tmp_path / "d.csv")]) == 0
    assert read_rows(tmp_path / "d.csv")[0]["samples"] == "7"


def test_config_rejects_unknown_keys(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"colour": "blue"}))
    assert main(["check-l2", "--config", str(cfg)]) == 1
    assert "--config" in capsys.readouterr().err


def test_output_directory_from_environment(tmp_path, monkeypatch, ramp_csv):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "runs"))
    assert main(["transitions", "--input", str(ramp_csv)]) == 0
    rows = read_rows(tmp_path / "runs" / "transitions.csv")
    assert len(rows) == 1 and float(rows[0]["start"]) < 0.5 < float(rows[0]["end"])


def test_recovery_command(tmp_path, capsys):
    out = tmp_path / "rec.csv"
    assert main(["recovery", "--k", "1", "--eps", "0.05", "--jumps", "0.5", "--T", "4", "--grid-n", "801",
                 "--out", str(out)]) == 0
    info = summary(capsys)
    assert info["jumps"] == 1 and abs(info["total"] - 8 / 3) < 0.05
    assert read_csv(out).grid.n == 801


def test_sweep_T_command(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["sweep-T", "--k", "1", "--T-list", "5,10", "--grid-n", "501", "--out", str(out)]) == 0
    rows = read_rows(out)
    assert [float(r["T"]) for r in rows] == [5.0, 10.0]


def test_console_entry_point(constant_csv):
    proc = subprocess.run([sys.executable, "-m", "fracwell.cli", "seminorm", "--k", "1", "--s", "0.5",
                           "--input", str(constant_csv)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0] == "k,s,n,seminorm"
