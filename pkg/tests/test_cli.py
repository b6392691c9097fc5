import hashlib
import shutil
from pathlib import Path

import pytest

from thermopf import cli
from thermopf.report import CANDIDATE_COLUMNS, read_candidates, read_table

DATA = Path(cli.__file__).parent / "data" / "case33.toml"


@pytest.fixture
def case_file(tmp_path):
    path = tmp_path / "case33.toml"
    shutil.copy(DATA, path)
    return path


def digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def test_thermal_solve(case_file, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["thermal-solve", "--case", str(case_file), "--fan", "2000", "--current", "50",
                     "--out", str(out)]) == 0
    rows = read_table(out / "temperatures.csv")
    assert len(rows) == 10 and all(r["temperature_k"] > 308 for r in rows)


def test_policy_prints_cooling_direction(case_file, tmp_path, capsys):
    assert cli.main(["policy", "--case", str(case_file), "--target-scale", "0.95", "--weight", "0.25",
                     "--out", str(tmp_path)]) == 0
    lines = dict(line.split(" = ") for line in capsys.readouterr().out.splitlines() if " = " in line
                 and line.startswith("delta"))
    assert float(lines["delta_fan_rpm"]) > 0
    assert float(lines["delta_squared_current_a2"]) < 0
    assert len(read_table(tmp_path / "policy.csv")) == 10


def test_opf_and_fixed_magnitude(tmp_path):
    assert cli.main(["opf", "--case", "case33", "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["opf", "--case", "case33", "--current", "50", "--horizon", "3",
                     "--out", str(tmp_path / "b")]) == 0
    assert len(read_table(tmp_path / "b" / "dispatch.csv")) == 3


def test_two_layer_is_byte_deterministic(case_file, tmp_path):
    before = digest(case_file)
    names = ("two_layer_candidates.csv", "sweep_weight.csv", "sweep_target.csv", "cost_vs_weight.csv")
    for run in ("r1", "r2"):
        assert cli.main(["two-layer", "--case", str(case_file), "--out", str(tmp_path / run)]) == 0
    for name in names:
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()
    assert digest(case_file) == before
    rows = read_candidates(tmp_path / "r1" / "two_layer_candidates.csv")
    assert len(rows) == 100
    header = (tmp_path / "r1" / "two_layer_candidates.csv").read_text().splitlines()[0]
    assert tuple(header.split(",")) == CANDIDATE_COLUMNS
    assert len(read_table(tmp_path / "r1" / "cost_vs_weight.csv")) == 20


def test_compare_writes_report(tmp_path):
    args = ["compare", "--case", "case33", "--weight", "0.25", "--target-scale", "0.95", "--out", str(tmp_path)]
    # a coarser mixed grid keeps this quick; nesting adds the two-layer points
    text = DATA.read_text().replace("fan_step = 50.0", "fan_step = 500.0").replace("current_step = 1.0", "current_step = 8.0")
    case = tmp_path / "coarse.toml"
    case.write_text(text)
    args[2] = str(case)
    assert cli.main(args) == 0
    report = (tmp_path / "comparison.txt").read_text()
    assert "dominance holds" in report
    assert read_candidates(tmp_path / "mixed_candidates.csv")


@pytest.mark.parametrize("argv", [
    ["thermal-solve"],
    ["thermal-solve", "--case", "case33", "--bogus"],
    ["frobnicate", "--case", "case33"],
    ["policy", "--case", "case33", "--weight", "0"],
    ["policy", "--case", "case33", "--reduction", "median"],
    ["thermal-solve", "--case", "/nonexistent.toml"],
    ["opf", "--case", "case33", "--current", "-3"],
])
def test_invalid_input_exit_one(argv, tmp_path, capsys):
    assert cli.main(argv + ["--out", str(tmp_path)]) == 1
    assert capsys.readouterr().err.strip()


@pytest.mark.parametrize("argv", [
    ["opf", "--case", "case33", "--current", "100"],
    ["thermal-solve", "--case", "case33", "--fan", "0", "--current", "1000"],
])
def test_infeasible_exit_two(argv, tmp_path, capsys):
    assert cli.main(argv + ["--out", str(tmp_path)]) == 2
    assert "infeasible" in capsys.readouterr().err


def test_mixed_empty_exit_two(case_file, tmp_path, capsys):
    case_file.write_text(case_file.read_text().replace("temp_max = 318.0", "temp_max = 300.0"))
    assert cli.main(["mixed", "--case", str(case_file), "--out", str(tmp_path)]) == 2
    assert "empty feasible set" in capsys.readouterr().err
