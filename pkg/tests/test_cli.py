import json
import os
import subprocess
import sys

import pytest

from cli_cases import CASES, DATA, GOLDEN, run_case
from lpsi.cli import EXIT_INFEASIBLE, EXIT_OK, EXIT_RESOURCE, EXIT_USAGE, EXIT_VALIDATION


@pytest.mark.parametrize("name,argv", CASES, ids=[c[0] for c in CASES])
def test_golden(name, argv):
    code, out, err = run_case(argv)
    assert code == EXIT_OK, err
    assert out == (GOLDEN / name).read_text()


def test_solve1d_content():
    doc = json.loads((GOLDEN / "solve1d_zigzag.json").read_text())
    assert doc["solution"]["knots"] == [["1/1", "-2/1"], ["2/1", "2/1"]]
    assert doc["solution"]["costs"]["0.5"] == pytest.approx(2 * 2**0.5, abs=1e-15)
    ties = json.loads((GOLDEN / "solve1d_ties.json").read_text())["solution"]
    assert ties["unique"] is False and ties["ties"] == [{"start": 1, "m": 2, "alpha": [1]}]


def test_pstar_content():
    doc = json.loads((GOLDEN / "pstar.json").read_text())
    assert 0.20 < doc["pstar"]["value"] < 0.21


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_exit_codes(tmp_path):
    zz = str(DATA / "zz.csv")
    peak = str(DATA / "peak.csv")
    assert run_case(["solve1d", "--data", zz])[0] == EXIT_USAGE
    assert run_case(["nonsense"])[0] == EXIT_USAGE
    assert run_case(["oracle", "--data", zz, "--kind", "grid", "--p", "0.5"])[0] == EXIT_USAGE  # seed is required
    assert run_case(["solve1d", "--data", zz, "--p", "1.5"])[0] == EXIT_VALIDATION
    assert run_case(["solve1d", "--data", _write(tmp_path, "dup.csv", "x,y\n0,0\n0,1\n"), "--p", "0.5"])[0] == EXIT_VALIDATION
    assert run_case(["solve1d", "--data", _write(tmp_path, "bad.csv", "x,y\n0\n"), "--p", "0.5"])[0] == EXIT_VALIDATION
    assert run_case(["solve-nd", "--data", peak, "--p", "0.5", "--R", "0.1"])[0] == EXIT_INFEASIBLE
    assert run_case(["l0", "--data", peak, "--support-cap", "2"])[0] == EXIT_RESOURCE
    assert run_case(["--version"])[0] == EXIT_OK


def test_verify_detects_tampering(tmp_path):
    doc = json.loads((GOLDEN / "solve1d_zigzag.json").read_text())
    doc["solution"]["l1"] = 3
    path = _write(tmp_path, "t.json", json.dumps(doc))
    code, out, _ = run_case(["verify", "--data", str(DATA / "zz.csv"), "--result", path])
    assert code == EXIT_VALIDATION and "l1" in json.loads(out)["solution"]["failed"]

    doc = json.loads((GOLDEN / "solve_nd_exact.json").read_text())
    doc["solution"]["z_nonzero"][0][1] *= 1.5
    path = _write(tmp_path, "n.json", json.dumps(doc))
    code, out, _ = run_case(["verify", "--data", str(DATA / "peak.csv"), "--result", path])
    assert code == EXIT_VALIDATION


def test_out_and_timing(tmp_path):
    target = tmp_path / "r.json"
    code, out, _ = run_case(["solve1d", "--data", str(DATA / "zz.csv"), "--p", "0.5", "--out", str(target), "--timing"])
    assert code == EXIT_OK and out == ""
    assert "wall_time" in json.loads(target.read_text())["provenance"]


def test_train_trajectory_file(tmp_path):
    traj = tmp_path / "t.csv"
    code, _, _ = run_case(
        ["train", "--data", str(DATA / "zz.csv"), "--config", str(DATA / "cfg.json"), "--seed", "0", "--trajectory", str(traj)]
    )
    lines = traj.read_text().splitlines()
    assert code == EXIT_OK and lines[0] == "step,objective,data_loss,penalty,active_neurons" and len(lines) == 301


@pytest.mark.parametrize("argv", [CASES[1][1], CASES[7][1], CASES[13][1]], ids=["solve1d", "solve-nd", "train"])
def test_byte_identical_across_thread_counts(argv):
    outs = set()
    for threads in ("1", "4", "1"):
        env = dict(os.environ, LPSI_THREADS=threads)
        res = subprocess.run([sys.executable, "-m", "lpsi.cli", *argv], capture_output=True, env=env, check=True)
        outs.add(res.stdout)
    assert len(outs) == 1
