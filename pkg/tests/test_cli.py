import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from kypkit import serialization as ser
from kypkit.cli import main

DATA = Path(__file__).resolve().parent.parent / "data" / "problems"


def run(tmp_path, *argv):
    out = tmp_path / "report.out"
    code = main([*map(str, argv), "--out", str(out)])
    return code, out.read_text()


def run_json(tmp_path, *argv):
    code, text = run(tmp_path, *argv)
    return code, json.loads(text)


def test_counterexample_exit_and_gap(tmp_path):
    code, rep = run_json(tmp_path, "counterexample")
    assert code == 1
    assert rep["gap"] >= 0.5 - 1e-6
    assert rep["upper"][-1] >= 0.4999999 and rep["lower"][-1] <= 1e-6


def test_solve_kyp_scalar(tmp_path):
    code, rep = run_json(tmp_path, "solve-kyp", DATA / "scalar_lq.json")
    assert code == 0
    assert rep["certificate"]["P"] == [[pytest.approx(-1.0, abs=1e-12)]]


def test_lmi_strict_re_xu_has_witness(tmp_path):
    code, rep = run_json(tmp_path, "lmi-strict", DATA / "re_xu.json")
    assert code == 1
    assert rep["feasible"] is False and rep["witness"] is not None


def test_lmi_nonstrict_exit_codes(tmp_path):
    code, rep = run_json(tmp_path, "lmi-nonstrict", DATA / "re_xu.json")
    assert code == 1 and rep["error"] == "NotControllable"
    code, rep = run_json(tmp_path, "lmi-nonstrict", DATA / "re_xu_controllable.json")
    assert code == 1 and rep["feasible"] is False
    assert rep["witness"] == [pytest.approx(-1.0), pytest.approx(0.0, abs=1e-12)]


@pytest.mark.parametrize(
    "argv, expected",
    [
        (["check-freq", "scalar_lq.json"], 0),
        (["check-freq", "game_small.json"], 0),
        (["solve-kyp", "complex_lq.json"], 0),
        (["ct", "ct_lq.json"], 0),
        (["ct", "ct_lq.json", "--which", "strict_lmi"], 0),
        (["minimax", "game_small.json"], 0),
        (["iqc-check", "delay_iqc.json"], 1),
        (["oracle", "scalar_lq.json", "--horizon", "8"], 0),
        (["oracle", "game_small.json", "--horizon", "8"], 0),
    ],
)
def test_command_exit_codes(tmp_path, argv, expected):
    argv = [argv[0], DATA / argv[1], *argv[2:]]
    code, _ = run(tmp_path, *argv)
    assert code == expected


def test_ct_lq_certificate(tmp_path):
    code, rep = run_json(tmp_path, "ct", DATA / "ct_lq.json")
    assert code == 0
    assert rep["certificate"]["P"][0][0] == pytest.approx(1 - np.sqrt(2), abs=1e-10)


def test_reports_are_deterministic(tmp_path):
    for argv in (["counterexample"], ["solve-kyp", DATA / "complex_lq.json"], ["minimax", DATA / "game_small.json"]):
        _, a = run(tmp_path, *argv)
        _, b = run(tmp_path, *argv)
        assert a == b


def test_float_format_has_17_digits(tmp_path):
    _, text = run(tmp_path, "solve-kyp", DATA / "scalar_lq.json")
    assert "-1" in text
    _, text = run(tmp_path, "oracle", DATA / "game_small.json", "--horizon", "4")
    value = json.loads(text)["value"]
    assert f'"value": {format(value, ".17g")}' in text


@pytest.mark.parametrize("name", ["scalar_lq.json", "complex_lq.json", "ct_lq.json"])
def test_certificate_round_trip(tmp_path, name):
    code, rep = run_json(tmp_path, "solve-kyp" if name != "ct_lq.json" else "ct", DATA / name)
    assert code == 0
    doc = json.loads((DATA / name).read_text())
    cert = {}
    for key in ("P", "C", "D"):
        cert[key] = ser.to_plain(rep["certificate"][key])
    doc["certificate"] = cert
    path = tmp_path / "with_cert.json"
    path.write_text(json.dumps(doc))
    code, rep = run_json(tmp_path, "solve-kyp", path)
    assert code == 0 and rep["mode"] == "verify" and rep["passed"]


def test_tampered_certificate_fails(tmp_path):
    doc = json.loads((DATA / "scalar_lq.json").read_text())
    doc["certificate"] = {"P": [[-1.0]], "C": [[0.0]], "D": [[1.3]]}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    code, rep = run_json(tmp_path, "solve-kyp", path)
    assert code == 1 and not rep["residual_ok"]


@pytest.mark.parametrize(
    "text, fragment",
    [
        ('{"kind": "kyp", "A": [[0.0]], "B": [[1.0]]', "line 1"),
        ('{"kind": "kyp", "A": [[0.0]], "B": [[1.0]]}', "missing field 'Q'"),
        ('{"kind": "kyp", "A": [[0.0]], "B": [[1.0]], "Q": [[1, "x"], [0, 1]]}', "field 'Q' row 0 col 1"),
        ('{"kind": "kyp", "A": [[0.0]], "B": [[1.0]], "Q": [[1, 0], [0]]}', "field 'Q' row 1"),
        ('{"kind": "kyp", "A": [[0.0]], "B": [[1.0]], "Q": [[0, 1], [0, 0]]}', "problem:"),
        ('{"kind": "thing"}', "field 'kind'"),
        ('{"kind": "kyp", "time": "later", "A": [[0.0]], "B": [[1.0]], "Q": [[1, 0], [0, 1]]}', "field 'time'"),
        ('{"kind": "kyp", "partition": {"n": 2, "m": 1}, "A": [[0.0]], "B": [[1.0]], "Q": [[1, 0], [0, 1]]}', "partition.n"),
    ],
)
def test_input_errors(tmp_path, text, fragment):
    path = tmp_path / "in.json"
    path.write_text(text)
    code, rep = run_json(tmp_path, "solve-kyp", path)
    assert code == 3
    assert rep["error"] == "InputError" and fragment in rep["message"]


def test_missing_file_and_bad_flags(tmp_path):
    code, rep = run_json(tmp_path, "solve-kyp", tmp_path / "nope.json")
    assert code == 3 and "cannot read" in rep["message"]
    assert main(["not-a-command"]) == 3
    assert main(["solve-kyp", "--grid", "many"]) == 3


def test_csv_and_text_formats(tmp_path):
    code, text = run(tmp_path, "check-freq", DATA / "scalar_lq.json", "--grid", "16", "--format", "csv")
    assert code == 0 and text.splitlines()[0] == "angle_or_omega,min_eig,max_eig,classification"
    code, text = run(tmp_path, "solve-kyp", DATA / "scalar_lq.json", "--format", "text")
    assert code == 0 and "exit_code: 0" in text


def test_console_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "kypkit.cli", "counterexample"], capture_output=True, text=True, timeout=60
    )
    assert proc.returncode == 1
    assert json.loads(proc.stdout)["minimax_fails"] is True
