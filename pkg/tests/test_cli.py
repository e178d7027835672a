import json
import subprocess
import sys

import pytest

from sspectrum import data_path
from sspectrum.cli import InputError, RunConfig, main, parse_quaternion, parse_range
from sspectrum.quat import Quaternion

EX_A = str(data_path("example-A.json"))
EX_B = str(data_path("example-B.json"))


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def result(out):
    return json.loads(out)["result"]


def test_spectrum_example_a(capsys):
    code, out, _ = run(capsys, "spectrum", EX_A)
    spheres = result(out)["spheres"]
    assert code == 0 and len(spheres) == 1
    assert abs(spheres[0]["re"]) < 1e-9 and abs(spheres[0]["rad"] - 1) < 1e-9


def test_spectrum_example_b(capsys):
    code, out, _ = run(capsys, "spectrum", EX_B)
    spheres = sorted((round(s["re"], 6), round(s["rad"], 6)) for s in result(out)["spheres"])
    assert code == 0 and spheres == [(-0.707107, 0.707107), (0.0, 1.0), (0.707107, 0.707107)]


def test_malformed_json_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": ')
    code, out, err = run(capsys, "spectrum", str(bad))
    assert code == 2 and out == "" and "invalid JSON" in err
    code, _, err = run(capsys, "spectrum", str(tmp_path / "missing.json"))
    assert code == 2 and err


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["scan", EX_A])  # --grid required
    assert exc.value.code == 2


def test_bad_grid_and_quaternion_exit_2(capsys):
    assert run(capsys, "scan", EX_A, "--grid", "0,1,1,0")[0] == 2
    assert run(capsys, "resolvent", EX_A, "--q", "1,2,3,4,5")[0] == 2
    assert run(capsys, "shift", "index", "--op", "W")[0] == 2


def test_numeric_failure_exit_3(capsys):
    code, out, err = run(capsys, "resolvent", EX_A, "--q", "0,1,0,0", "--N", "5")
    assert code == 3 and out == "" and "DivergenceError" in err


def test_scan_csv(capsys):
    code, out, _ = run(capsys, "scan", EX_B, "--grid=-1,1,1,0.5", "--out", "csv")
    lines = out.splitlines()
    assert code == 0 and lines[0].startswith("# config: ")
    header = json.loads(lines[0][len("# config: "):])
    assert header["grid"] == "-1,1,1,0.5" and header["command"] == "scan"
    assert lines[1] == "u,r,sigma_min" and len(lines) == 2 + 5 * 3


def test_scan_json_and_output_file(tmp_path, capsys):
    target = tmp_path / "scan.json"
    code, out, _ = run(capsys, "scan", EX_A, "--grid", "0,1,1,0.5", "-o", str(target))
    assert code == 0 and out == ""
    rows = json.loads(target.read_text())["result"]["rows"]
    assert [0.0, 1.0] in [r[:2] for r in rows]
    assert min(r[2] for r in rows) < 1e-12


def test_resolvent(capsys):
    code, out, _ = run(capsys, "resolvent", EX_A, "--q", "2,0.5,0,0", "--N", "40")
    res = result(out)
    assert code == 0 and res["residual_series"][-1] < 1e-9 and res["residual_coeff"][-1] < 1e-9


def test_fredholm_and_weyl_commands(tmp_path, capsys):
    code, out, _ = run(capsys, "fredholm-spectrum", EX_B)
    assert code == 0 and len(result(out)["spheres"]) == 3
    # block upper-triangular: [[i, 1], [0, 2]] keeps only the diagonal blocks under the projection
    f = tmp_path / "tri.json"
    f.write_text(json.dumps({"n": 2, "entries": [[[0, 1, 0, 0], [1, 0, 0, 0]], [[0, 0, 0, 0], [2, 0, 0, 0]]]}))
    code, out, _ = run(capsys, "weyl-spectrum", str(f), "--hom", "block", "--k1", "1", "--exclude", "zero")
    assert code == 0 and json.loads(out)["config"]["options"]["exclude"] == "zero"
    code, out, _ = run(capsys, "fredholm-spectrum", str(f), "--hom", "block", "--k1", "1")
    spheres = sorted((round(s["re"], 9), round(s["rad"], 9)) for s in result(out)["spheres"])
    assert code == 0 and spheres == [(0.0, 1.0), (2.0, 0.0)]
    assert run(capsys, "weyl-spectrum", EX_B, "--hom", "block", "--k1", "1")[0] == 2


def test_boundary_spectrum_command(capsys):
    code, out, _ = run(capsys, "boundary-spectrum", EX_A)
    assert code == 0 and "spheres" in result(out)


def test_config_header_has_tolerances(capsys):
    _, out, _ = run(capsys, "spectrum", EX_A, "--sphere-tol", "1e-8")
    cfg = json.loads(out)["config"]
    assert cfg["tolerances"]["sphere_dedup"] == 1e-8
    assert cfg["inputs"] == [EX_A] and cfg["version"]
    with pytest.raises(InputError):
        RunConfig("spectrum", sphere_tol=0.0)
    with pytest.raises(InputError):
        RunConfig("spectrum", out="xml")


def test_verify_identity_e1(capsys):
    code, out, _ = run(capsys, "verify", "identity-e1", "--trials", "200", "--seed", "7")
    res = result(out)
    assert code == 0 and res["passed"] and res["count"] == 200
    assert all(i["residual"] < 1e-9 * i["scale"] for i in res["instances"])


def test_verify_shift_boundary(capsys):
    code, out, _ = run(capsys, "verify", "shift-boundary", "--q", "0.5", "--n", "10")
    inst = result(out)["instances"]
    assert code == 0 and [i["n"] for i in inst] == [10]
    assert inst[0]["distance"] <= inst[0]["bound"] <= 2 * 0.5 ** 5 + 0.5 ** 10


def test_verify_sum_block(capsys):
    code, out, _ = run(capsys, "verify", "sum", "--algebra", "block", "--seed", "1")
    assert code == 0 and result(out)["passed"]


@pytest.mark.parametrize("suite", ["inverse", "product", "boundary"])
def test_verify_other_suites(capsys, suite):
    code, out, _ = run(capsys, "verify", suite, "--trials", "5", "--seed", "2")
    assert code == 0 and result(out)["failures"] == 0


def test_verify_failure_is_per_instance_exit_1(capsys):
    code, out, _ = run(capsys, "verify", "shift-boundary", "--q", "1.5", "--n", "2,3")
    res = result(out)
    assert code == 1 and res["count"] == 2 and res["failures"] == 2
    assert all("DomainError" in i["error"] for i in res["instances"])


def test_shift_commands(capsys):
    code, out, _ = run(capsys, "shift", "index", "--op", "Su", "--power", "2")
    assert code == 0 and result(out)["index"] == -2 and result(out)["dimCoker"] == 2
    code, out, _ = run(capsys, "shift", "index", "--op", "R")
    assert result(out)["dimKer"] == 1 and result(out)["index"] == 0
    code, out, _ = run(capsys, "shift", "index", "--op", "T")
    assert code == 0 and result(out)["fredholm"] is False
    code, out, _ = run(capsys, "shift", "spectrum", "--op", "Su", "--grid=-1,1,1,0.5", "--out", "csv")
    assert code == 0 and out.splitlines()[1] == "u,r,fredholm_spectrum,weyl_spectrum,index"
    code, out, _ = run(capsys, "shift", "boundary", "--q", "0.5", "--n", "1..4", "--trials", "5")
    assert code == 0 and [w["n"] for w in result(out)["witnesses"]] == [1, 2, 3, 4]
    code, out, _ = run(capsys, "shift", "residual", "--op", "R", "--q", "0,0.5", "--n", "10,20")
    r = result(out)["residuals"]
    assert code == 0 and r[1]["residual"] < r[0]["residual"]


def test_shift_op_from_file(tmp_path, capsys):
    f = tmp_path / "op.json"
    f.write_text(json.dumps({"coeff": [2, 0, 0, 0], "power": -1, "unilateral": True, "fin": []}))
    code, out, _ = run(capsys, "shift", "index", "--op", str(f))
    assert code == 0 and result(out)["index"] == -1


def test_deterministic_byte_identical(capsys):
    outs = [run(capsys, "verify", "sum", "--trials", "4", "--seed", "3")[1] for _ in range(2)]
    assert outs[0] == outs[1]
    outs = [run(capsys, "scan", EX_B, "--grid", "0,1,1,0.25", "--out", "csv")[1] for _ in range(2)]
    assert outs[0] == outs[1]


def test_parsers():
    assert parse_quaternion("2") == Quaternion(2.0)
    assert parse_quaternion("1,2,3,4") == Quaternion(1, 2, 3, 4)
    assert parse_range("1..4") == [1, 2, 3, 4] and parse_range("1,3") == [1, 3] and parse_range("7") == [7]
    assert parse_quaternion("1,2") == Quaternion(1, 2)
    for bad in ("x", "1,2,3,4,5"):
        with pytest.raises(InputError):
            parse_quaternion(bad)
    for bad in ("4..1", "a"):
        with pytest.raises(InputError):
            parse_range(bad)


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sspectrum", "spectrum", EX_A], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["config"]["command"] == "spectrum"
