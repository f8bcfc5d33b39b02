import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from ltinet.cli import EXIT_ANALYSIS, EXIT_INPUT, EXIT_NEGATIVE, EXIT_OK, run

DATA = Path(__file__).resolve().parent.parent / "data"


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run([str(a) for a in argv], out, err)
    return code, (json.loads(out.getvalue()) if out.getvalue() else None), err.getvalue()


def test_mincut_butterfly():
    code, rep, _ = call("mincut", DATA / "butterfly.json")
    assert code == EXIT_OK
    assert {k: v["mincut"] for k, v in rep["mincut"].items()} == {"t1": 2, "t2": 2}


def test_code_synth_butterfly():
    code, rep, _ = call("code-synth", DATA / "butterfly.json", "--seed", 1)
    assert code == EXIT_OK and rep["achieved_rank"] == {"t1": 2, "t2": 2}


def test_capacity_and_verify():
    code, rep, _ = call("capacity", DATA / "two_hop.json", "--seed", 0)
    assert code == EXIT_OK and rep["capacity"] == {"rx": 1}
    code, rep, _ = call("verify", DATA / "relay_triangle.json", "--seed", 0)
    assert code == EXIT_OK and rep["mincut_equals_maxflow"]


def test_seed_required():
    code, rep, err = call("capacity", DATA / "two_hop.json")
    assert code == EXIT_INPUT and "--seed" in err


def test_bad_inputs(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert call("mincut", bad)[0] == EXIT_INPUT
    assert call("mincut", tmp_path / "missing.json")[0] == EXIT_INPUT
    assert call("nonsense")[0] == EXIT_INPUT
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"nodes": [{"id": "tx", "kind": "nobody"}]}))
    assert call("mincut", wrong)[0] == EXIT_INPUT
    assert call("externalize", DATA / "jordan_example.json")[0] == EXIT_INPUT


def test_analysis_error_exit(tmp_path):
    # eigenvalues +-sqrt(2) are outside Q, so the unstable spectrum cannot be enumerated
    sysf = tmp_path / "irr.json"
    sysf.write_text(json.dumps({"A": [["0", "2"], ["1", "0"]], "controllers": [{"B": [["1"], ["0"]], "C": [["1", "0"]]}]}))
    code, rep, err = call("fixed-modes", sysf, "--seed", 0)
    assert code == EXIT_ANALYSIS and "UnsupportedSpectrum" in err


def test_broadcast_gap_verdicts_and_negative_exit():
    code, rep, _ = call("stabilizability", DATA / "broadcast_scalar.json")
    assert code == EXIT_OK
    assert rep["sufficient"] is False and rep["necessary"] is True
    code, rep, _ = call("synthesize", DATA / "broadcast_scalar.json", "--seed", 0)
    assert code == EXIT_NEGATIVE and rep["verdict"] == "not stabilizable"


def test_synthesize_and_simulate(tmp_path):
    code, rep, _ = call("synthesize", DATA / "scalar_ptop.json", "--seed", 0)
    assert code == EXIT_OK and rep["design"]["verdict"] == "stable"
    csv = tmp_path / "trace.csv"
    code, rep, _ = call("simulate", DATA / "ptop_random.json", "--seed", 0, "--steps", 60, "--csv", csv, "--precision", 6)
    assert code == EXIT_OK and rep["bounded"]
    lines = csv.read_text().splitlines()
    assert len(lines) == 62 and lines[0].startswith("step,x0")


def test_outputs_are_deterministic():
    a = call("synthesize", DATA / "ptop_random.json", "--seed", 3)
    b = call("synthesize", DATA / "ptop_random.json", "--seed", 3)
    assert a == b
    assert a[1]["config"]["seed"] == 3 and len(a[1]["inputs_sha256"]) == 64


def test_externalize_jordan_round_trips_to_mincut(tmp_path):
    code, rep, _ = call("externalize", DATA / "jordan_example.json", "--form", "jordan", "--lambda", "2")
    assert code == EXIT_OK
    net = tmp_path / "ext.json"
    net.write_text(json.dumps(rep["network"]))
    code, mc, _ = call("mincut", net)
    assert code == EXIT_OK
    code, fm, _ = call("fixed-modes", DATA / "jordan_example.json", "--seed", 0, "--lambda", "2", "--branch", "jordan")
    assert fm["eigenvalues"][0]["details"]["mincut"] == mc["mincut"]["rx"]["mincut"]


def test_realize_round_trips_to_fixed_modes(tmp_path):
    code, rep, _ = call("realize", DATA / "scalar_ptop.json")
    assert code == EXIT_OK
    f = tmp_path / "sys.json"
    f.write_text(json.dumps(rep["system"]))
    code, fm, _ = call("fixed-modes", f, "--seed", 0)
    assert code == EXIT_OK and fm["unstable_fixed_mode"] is False


def test_linearize_round_trips_to_capacity(tmp_path):
    code, rep, _ = call("linearize", DATA / "relay_triangle.json", "--aux-receiver")
    assert code == EXIT_OK and rep["offset_d"] == 2
    f = tmp_path / "lin.json"
    f.write_text(json.dumps(rep["network"]))
    code, mc, _ = call("mincut", f)
    assert mc["mincut"]["D'"]["mincut"] == 3


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ltinet.cli", "mincut", str(DATA / "two_hop.json")],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["mincut"]["rx"]["mincut"] == 1
