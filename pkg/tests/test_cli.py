import json

import pytest

from gridforest.cli import main
from gridforest.data_io import save_network
from gridforest.graph import make_network
from gridforest.scenario import FaultScenario


@pytest.fixture
def k4_file(tmp_path):
    net = make_network(4, [(1, 2), (2, 3), (3, 4), (4, 1), (1, 3), (2, 4)], r=0.01, x=0.01, s_cap=100.0)
    p = tmp_path / "k4.json"
    save_network(net, p)
    return p


def test_oracle_commands(k4_file, capsys):
    assert main(["oracle", "count", "--net", str(k4_file)]) == 0
    assert capsys.readouterr().out.strip() == "16"
    assert main(["oracle", "trees", "--net", str(k4_file)]) == 0
    assert capsys.readouterr().out.strip() == "16"
    assert main(["oracle", "forests", "--net", str(k4_file), "--list"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "38" and len(out) == 39


def test_lp_test_command(k4_file, capsys):
    assert main(["lp-test", "--net", str(k4_file), "--trials", "20", "--coupled"]) == 0
    assert "non-integral optima 0" in capsys.readouterr().out


def test_solve_writes_valid_solution(tmp_path, capsys):
    out = tmp_path / "sol.json"
    assert main(["solve", "--net", "ieee33", "--out", str(out)]) == 0
    assert "restored_kw=3715.0" in capsys.readouterr().out
    assert json.loads(out.read_text())["restored_kw"] == pytest.approx(3715.0)


def test_infeasible_solve_exit_code(tmp_path):
    scen = tmp_path / "s.json"
    # forcing a tie closed on top of the full radial tree leaves the baseline no way out
    scen.write_text(FaultScenario(closed_branches=(33,) + tuple(range(1, 33))).to_json())
    assert main(["solve", "--net", "ieee33", "--scenario", str(scen), "--variant", "radial_baseline"]) == 2


def test_errors_exit_one(tmp_path, capsys):
    assert main(["oracle", "count", "--net", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    assert main(["oracle", "count", "--net", str(bad)]) == 1
    assert "schema" in capsys.readouterr().err


def test_batch_and_summarize(tmp_path, capsys):
    csv = tmp_path / "b.csv"
    assert main(["batch", "--n", "2", "--seed", "5", "--variants", "proposed", "--csv", str(csv)]) == 0
    first = capsys.readouterr().out
    assert "scf/dmcf objective mismatches: 0" in first
    assert main(["summarize", "--csv", str(csv), "--compare", "proposed/scf", "proposed/dmcf"]) == 0
    assert "proposed/dmcf" in capsys.readouterr().out
