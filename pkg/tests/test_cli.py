import json
import subprocess
import sys

import numpy as np
import pytest

from dtnforms.cli import run
from dtnforms.data import load_fixture
from dtnforms.forms import write_cochain_csv


def _run(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_spectrum_disk(capsys):
    code, out, _ = _run(capsys, "spectrum", "--kind", "lambda", "--degree", "0", "--count", "6")
    assert code == 0
    lines = out.splitlines()
    assert len(lines) == 6 and lines[0].startswith("1,0.0")
    vals = [float(line.split(",")[1]) for line in lines[1:]]
    assert np.allclose(vals, [1, 1, 2, 2, 3], rtol=0.05)
    groups = [int(line.split(",")[2]) for line in lines]
    assert groups[1] == groups[2]


def test_spectrum_is_deterministic(capsys):
    args = ("spectrum", "--kind", "rs", "--degree", "1", "--count", "4", "--mesh", "annulus_h0.1")
    assert _run(capsys, *args)[1] == _run(capsys, *args)[1]


def test_spectrum_json_with_probe(capsys):
    code, out, _ = _run(capsys, "spectrum", "--kind", "lambda", "--degree", "0", "--count", "3",
                        "--mesh", "disk_h0.1", "--format", "json", "--probe", "20", "--seed", "5")
    data = json.loads(out)
    assert code == 0 and data["zero_count"] == 1 and data["minmax_probe"]["violations"] == 0
    assert len(data["eigenvalues"]) == 3


def test_hodge_on_closed_mesh(capsys):
    code, out, _ = _run(capsys, "spectrum", "--kind", "hodge", "--degree", "0", "--count", "5",
                        "--mesh", "circle_h0.02")
    vals = [float(line.split(",")[1]) for line in out.splitlines()]
    assert code == 0 and np.allclose(vals, [0, 1, 1, 4, 4], rtol=0.03, atol=1e-9)


def test_lambda_on_closed_mesh_is_usage_error(capsys):
    assert _run(capsys, "spectrum", "--kind", "lambda", "--degree", "0", "--mesh", "circle_h0.02")[0] == 2


def test_export(tmp_path, capsys):
    code, _, _ = _run(capsys, "spectrum", "--kind", "lambda", "--degree", "0", "--count", "2",
                      "--mesh", "disk_h0.1", "--export", str(tmp_path / "op"))
    assert code == 0
    assert json.loads((tmp_path / "op" / "manifest.json").read_text())["kind"] == "Lambda"


def test_ball_csv(capsys):
    code, out, _ = _run(capsys, "ball", "--n", "3", "--p", "1", "--kmax", "1")
    lines = out.splitlines()
    assert code == 0
    assert lines[0] == "n,p,k,family,lambda,L,delta,multiplicity"
    assert "3,1,1,Hprime,0/1,3/2,3/1,4" in lines
    assert "3,1,1,Hdoubleprime,2/1,2/1,4/1,6" in lines


def test_ball_sharpness_json(capsys):
    code, out, _ = _run(capsys, "ball", "--n", "3", "--p", "1", "--kmax", "1", "--sharpness", "4",
                        "--format", "json")
    data = json.loads(out)
    assert code == 0 and data["sharpness"][0]["lhs"] == "4/1" and data["sharpness"][3]["rhs"] == "9/1"


def test_ball_range_is_usage_error(capsys):
    assert _run(capsys, "ball", "--n", "9", "--p", "1", "--kmax", "1")[0] == 2


def test_mesh_info(capsys):
    code, out, _ = _run(capsys, "mesh-info", "--mesh", "annulus_h0.1")
    data = json.loads(out)
    assert code == 0
    assert data["betti"] == [1, 1, 0] and data["I"] == [1, 1]
    assert data["euler_characteristic"] == 0
    assert all(m["min_eig"] > 0 for m in data["mass"])


def test_mesh_file_path(tmp_path, capsys):
    from dtnforms.mesh import write_mesh
    path = tmp_path / "tri.mesh"
    write_mesh(load_fixture("triangle"), path)
    code, out, _ = _run(capsys, "mesh-info", "--mesh", str(path))
    assert code == 0 and json.loads(out)["mesh"] == "tri"


def test_verify_kernel_passes(tmp_path, capsys):
    out = tmp_path / "rep.json"
    code, _, _ = _run(capsys, "verify", "--suite", "kernel", "--mesh", "annulus_h0.1", "--output", str(out))
    data = json.loads(out.read_text())
    assert code == 0 and all(c["pass"] for c in data["checks"])


def test_verify_hps2_strict(capsys):
    code, out, _ = _run(capsys, "verify", "--suite", "hps2", "--strict", "--format", "csv")
    assert code == 0
    assert "hps2-ball/p=1/m=1" in out and ",4/1,4/1,0.0,True," in out


def test_verify_all_reports_duality_failure(capsys):
    # the conjugate of the second Steklov pair is not exactly representable (README, Known results)
    code, out, err = _run(capsys, "verify", "--suite", "all")
    data = json.loads(out)
    failed = sorted(c["name"] for c in data["checks"] if not c["pass"])
    assert code == 1
    assert failed == ["duality/p=0/i=004/energy", "duality/p=0/i=004/residual"]
    assert "FAIL duality/p=0/i=004/residual" in err


def test_decompose(tmp_path, capsys):
    mesh = load_fixture("annulus_h0.1")
    path = tmp_path / "u.csv"
    write_cochain_csv(np.random.default_rng(0).standard_normal(mesh.count(1)), path)
    code, out, _ = _run(capsys, "decompose", "--mesh", "annulus_h0.1", "--degree", "1", "--input", str(path),
                        "--format", "json")
    data = json.loads(out)
    assert code == 0
    assert data["recombination_error"] < 1e-9
    assert max(abs(v) for v in data["inner_products"].values()) < 1e-9 * data["norms"]["input"] ** 2
    code, out, _ = _run(capsys, "decompose", "--mesh", "annulus_h0.1", "--degree", "1", "--input", str(path))
    assert out.splitlines()[0] == "simplex_index,exact_D,coexact_N,field"


def test_decompose_bad_input(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("0,abc\n")
    assert _run(capsys, "decompose", "--degree", "1", "--input", str(path))[0] == 1
    assert _run(capsys, "decompose", "--degree", "1", "--input", str(tmp_path / "missing.csv"))[0] == 2


@pytest.mark.parametrize("argv", [
    [], ["bogus"], ["spectrum", "--kind", "lambda"], ["spectrum", "--kind", "x", "--degree", "0"],
    ["spectrum", "--kind", "lambda", "--degree", "7"], ["verify", "--mesh", "nowhere"],
    ["verify", "--suite", "kernel", "--jobs", "0"],
])
def test_usage_errors(argv, capsys):
    assert _run(capsys, *argv)[0] == 2


def test_version(capsys):
    code, out, _ = _run(capsys, "--version")
    assert code == 0 and "dtnforms 0.1.0" in out and "comparison=0.02" in out


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "dtnforms.cli", "ball", "--n", "2", "--p", "0", "--kmax", "1"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[1] == "2,0,1,Hdoubleprime,1/1,1/1,2/1,3"
