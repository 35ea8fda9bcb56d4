import json
import subprocess
import sys

import pytest

from pconvex.cli import main, parse_cone, parse_subspace

Q = "x1^2-x2^2-x3^2"


def run(args, tmp_path, name="out.json"):
    out = tmp_path / name
    code = main(args + ["--out", str(out)])
    return code, out


def test_sigma_command(tmp_path):
    code, out = run(["sigma", "--poly", Q, "--dim", "3", "--subspace", "e3"], tmp_path)
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["estimate"]["upper_bound"] < 1e-3
    assert doc["vanishes"] is True


def test_localize_command(tmp_path):
    code, out = run(["localize", "--poly", Q, "--dim", "3", "--xi", "1,1,0", "--subspace", "e3"], tmp_path)
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["localization"] == "2*x1 - 2*x2"
    assert doc["localization_bound"]["squared"] == "0"
    assert doc["convergence"]["verdict"] == "pass"
    assert (tmp_path / "localization_convergence.csv").exists()


def test_localize_not_characteristic(tmp_path):
    code, out = run(["localize", "--poly", Q, "--dim", "3", "--xi", "1,0,0"], tmp_path)
    assert code == 2
    assert (tmp_path / "out.json.partial").exists()
    assert not out.exists()


def test_hypoelliptic_command(tmp_path, capsys):
    assert main(["hypoelliptic", "--poly", "x1^2+x2^2", "--dim", "2"]) == 0
    assert json.loads(capsys.readouterr().out)["verdict"] == "supported"


def test_convexity_command(tmp_path):
    code, out = run(["convexity", "--poly", "x1^2+x2^2+x3^2", "--dim", "3", "--cone", "axis=0,0,1;cos2=1/2"],
                    tmp_path)
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["conclusions"]["P_surjective_on_X"]["value"] is True


@pytest.mark.parametrize("args", [
    ["sigma", "--poly", "x1 +* 2", "--dim", "3", "--subspace", "e3"],
    ["sigma", "--poly", "x5", "--dim", "3", "--subspace", "e3"],
    ["sigma", "--poly", Q, "--dim", "3", "--subspace", "e7"],
    ["sigma", "--poly", Q, "--dim", "3", "--subspace", "e3", "--t-grid", "0.5"],
    ["convexity", "--poly", Q, "--dim", "3", "--cone", "gen=1,0,0;-1,0,0"],
    ["reproduce-paper", "--dim", "2"],
])
def test_input_errors_exit_2(args, tmp_path):
    code, _ = run(args, tmp_path)
    assert code == 2
    partial = json.loads((tmp_path / "out.json.partial").read_text())
    assert partial["exit_code"] == 2


def test_usage_error_exits_1():
    with pytest.raises(SystemExit) as exc:
        main(["sigma", "--dim", "3"])
    assert exc.value.code == 1


def test_failed_assertion_exits_3(tmp_path):
    code, _ = run(["reproduce-paper", "--dim", "3", "--r-poly", "x1^2"], tmp_path)
    assert code == 3
    partial = json.loads((tmp_path / "out.json.partial").read_text())
    assert partial["exit_code"] == 3
    assert "hypoellipticity" in partial["partial"]


def test_seed_from_environment(tmp_path, monkeypatch):
    args = ["sigma0", "--poly", "x1^2+x2^2", "--dim", "2", "--subspace", "e2"]
    monkeypatch.setenv("PCONVEX_SEED", "7")
    run(args, tmp_path, "a.json")
    run(args + ["--seed", "7"], tmp_path, "b.json")
    a = json.loads((tmp_path / "a.json").read_text())
    assert a["config"]["seed"] == 7
    assert (tmp_path / "a.json").read_text() == (tmp_path / "b.json").read_text()


def test_parse_helpers():
    assert parse_subspace("e3", 3).rank == 1
    assert parse_subspace("e1,e2", 3).rank == 2
    assert parse_subspace("1,1,0;0,0,1", 3).rank == 2
    assert parse_subspace("0", 3).rank == 0
    assert parse_subspace("full", 3).rank == 3
    assert parse_cone("axis=0,0,1;cos2=1/2", 3).cos2 == 0.5
    assert parse_cone("gen=1,0;0,1", 2).is_proper()


@pytest.mark.slow
def test_reproduce_paper_subprocess_deterministic(tmp_path):
    outs = []
    for i in range(2):
        d = tmp_path / f"run{i}"
        d.mkdir()
        res = subprocess.run([sys.executable, "-m", "pconvex", "reproduce-paper", "--dim", "3",
                              "--out", str(d / "report.json")], capture_output=True, text=True)
        assert res.returncode == 0, res.stderr
        outs.append(d)
    a, b = outs
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    for f in a.glob("*.csv"):
        assert f.read_bytes() == (b / f.name).read_bytes()
