import json

import pytest

from flowoct.cli import main
from flowoct.linprog import read_lp


@pytest.fixture
def csv(tmp_path):
    p = tmp_path / "toy.csv"
    p.write_text("a,b,c,label\nx,0,1,A\ny,1,1,B\nz,0,0,A\nx,1,0,B\ny,0,1,A\nz,1,1,B\nx,0,0,A\ny,1,0,B\n")
    return str(p)


def test_train_to_file(csv, tmp_path):
    out = tmp_path / "res.json"
    assert main(["--data", csv, "--depth", "1", "--formulation", "benders", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["train_accuracy"] == 100.0 and doc["tree"]["feature"] == "b"


def test_stdout_and_lambda_grid(csv, capsys):
    assert main(["--data", csv, "--depth", "1", "--lambda-grid", "0,0.5", "--seed", "3"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["sweep"]) == 2 and doc["lambda"] in (0.0, 0.5)


def test_time_limit_is_a_completed_solve(capsys):
    assert main(["--data", "monk2", "--depth", "2", "--time-limit", "0.5"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["status"] == "time_limit" and doc["gap_percent"] > 0


def test_export_lp(csv, tmp_path):
    path = tmp_path / "m.lp"
    assert main(["--data", csv, "--depth", "1", "--multi-cuts", "--export-lp", str(path)]) == 0
    lp, names, integer = read_lp(path)
    # one-hot a -> 3 columns, plus b and c: 5 features, 2 classes, depth 1
    assert integer.sum() == 1 * 5 + 3 * 2 and lp.n_vars == len(names)


@pytest.mark.parametrize("args", [
    ["--data", "missing.csv"],
    ["--data", "monk1", "--depth", "0"],
    ["--data", "monk1", "--lambda", "2"],
    ["--data", "monk1", "--formulation", "oct", "--multi-cuts"],
    ["--data", "monk1", "--label", "nope"],
])
def test_input_errors(args):
    assert main(args) != 0


def test_bad_flag_exits_nonzero():
    with pytest.raises(SystemExit) as e:
        main(["--data", "monk1", "--formulation", "binoct"])
    assert e.value.code != 0
