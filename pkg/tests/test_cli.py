import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest
from scipy.special import erfc

from nmkernel import __version__
from nmkernel.cli import main, parse_complex, parse_grid, run_verification, DEFAULT_TOLERANCES
from nmkernel.kernel import density_grid, normalized_kernel_matrix
from nmkernel.orthopoly import CanonicalModel


def run_json(tmp_path, args, name="out.json"):
    out = tmp_path / name
    code = main(args + ["--out", str(out)])
    return code, (json.loads(out.read_text()) if out.exists() else None), out


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_density_t0_n1_at_origin(tmp_path):
    code, data, _ = run_json(tmp_path, ["density", "--n", "1", "--t", "0", "--grid", "-1:1:3,-1:1:3"])
    assert code == 0
    assert data["density"][1][1] == pytest.approx(1 / math.pi, rel=1e-15)
    assert data["grid"]["x"] == [-1.0, 0.0, 1.0]
    meta = data["metadata"]
    assert meta["version"] == __version__ and meta["command"] == "density"
    assert meta["rng"] == {"algorithm": "PCG64", "seed": 0}
    assert meta["parameters"]["n"] == 1 and meta["parameters"]["t"] == 0.0


def test_density_csv_round_trip(tmp_path):
    out = tmp_path / "d.csv"
    assert main(["density", "--n", "12", "--t", "0.4", "--grid", "-1.5:1.5:7,-1:1:5",
                 "--format", "csv", "--out", str(out)]) == 0
    header, rows = read_csv(out)
    assert header == ["x [plane]", "y [plane]", "density [per unit area]"]
    assert len(rows) == 35
    ref = density_grid(CanonicalModel(12, 0.4), parse_grid("-1.5:1.5:7,-1:1:5").points()).ravel()
    # repr() keeps 17 significant digits, so parsing recovers the exact doubles
    assert [float(v) for _, _, v in rows] == list(ref)


def test_kernel_json_round_trip(tmp_path):
    code, data, _ = run_json(tmp_path, ["kernel", "--n", "9", "--t", "0.2", "--w", "0.1+0.2j",
                                        "--grid", "-1:1:4,0:0.5:2"])
    assert code == 0
    pts = parse_grid("-1:1:4,0:0.5:2").points()
    ref = normalized_kernel_matrix(CanonicalModel(9, 0.2), [0.1 + 0.2j], pts.ravel())[0]
    got = [complex(v["re"], v["im"]) for row in data["kernel"] for v in row]
    assert got == list(ref)
    assert data["grid"]["x"] == list(pts[0].real) and data["grid"]["y"] == list(pts[:, 0].imag)


def test_general_potential_density(tmp_path):
    code, data, _ = run_json(tmp_path, ["density", "--n", "6", "--t0", "2", "--t1-re", "0.3", "--t1-im", "0.1",
                                        "--t2-im", "0.15", "--grid", "-1:1:3"])
    assert code == 0
    assert data["metadata"]["parameters"]["t2"] == {"re": 0.0, "im": 0.15}
    assert all(v >= 0 for v in data["density"][0])


def test_correlation_command(tmp_path):
    code, data, _ = run_json(tmp_path, ["correlation", "--n", "20", "--t", "0.3", "--points", "0.1;0.1"])
    assert code == 0 and abs(data["det_rescaled"]) <= 1e-12
    code, data, _ = run_json(tmp_path, ["correlation", "--n", "20", "--t", "0.3", "--points", "0.1;0.3-0.2j"])
    assert code == 0
    assert data["det"] == pytest.approx(data["det_rescaled"] * 20**2, rel=1e-12)
    assert data["entries"][0][1]["im"] == -data["entries"][1][0]["im"]


def test_limits_command(tmp_path):
    code, data, _ = run_json(tmp_path, ["limits", "--t", "0.3", "--regime", "edge", "--phi", "0.4",
                                        "--grid", "-2:2:5", "--points", "0;0.5j"])
    assert code == 0
    for a, v in zip(data["grid"]["x"], data["limit_density"][0]):
        assert v == pytest.approx(erfc(math.sqrt(2) * a) / (2 * math.pi), rel=1e-14)
    assert "limit_correlation" in data and "limit_correlation_renormalized" in data


def test_verify_passes_and_fails(tmp_path):
    code, data, _ = run_json(tmp_path, ["verify", "--n", "32", "--t", "0.3", "--samples", "20"])
    assert code == 0 and data["passed"] and data["failures"] == []
    assert set(data["suites"]) == {"identities", "closed_form", "derivative", "boundary"}
    code, data, _ = run_json(tmp_path, ["verify", "--n", "8", "--t", "0.3", "--samples", "5",
                                        "--tol-identity", "1e-30"], "fail.json")
    assert code == 3
    assert data["failures"] == ["identities"] and not data["suites"]["identities"]["passed"]


def test_run_verification_t_zero_skips_boundary():
    report = run_verification(8, 0.0, 1, 5, DEFAULT_TOLERANCES)
    assert "boundary" not in report and all(s["passed"] for s in report.values())


def test_sample_command(tmp_path):
    args = ["sample", "--n", "4", "--t", "0.3", "--sweeps", "400", "--burnin", "100", "--thin", "100",
            "--seed", "5"]
    code, data, _ = run_json(tmp_path, args)
    assert code == 0
    assert [s["sweep"] for s in data["snapshots"]] == [200, 300, 400]
    assert len(data["snapshots"][0]["positions"]) == 4
    assert data["metadata"]["rng"] == {"algorithm": "PCG64", "seed": 5}


@pytest.mark.parametrize("target,extra", [
    ("f-real", []),
    ("gpm", ["--t", "0.3"]),
    ("gw-phase", ["--t", "0.3"]),
    ("erfc-profile", ["--t", "0.3", "--n", "100"]),
])
def test_figures(tmp_path, target, extra):
    code, data, _ = run_json(tmp_path, ["figure", target, "--samples", "21"] + extra)
    assert code == 0
    if target == "f-real":
        fmax = max(v for v in data["data"]["f"] if v is not None)
        assert abs(fmax) < 0.05  # the maximum 0 sits at the vertex a_t
    if target == "erfc-profile":
        d = data["data"]
        assert max(abs(a - b) for a, b in zip(d["two_pi_density"], d["erfc_sqrt2_a"])) < 0.1
    if target == "gw-phase":
        assert len(data["data"]["phase_minus_gw"]) == 21


@pytest.mark.parametrize("args", [
    ["density", "--n", "4", "--grid", "0:1:2"],
    ["density", "--n", "4", "--t", "0.3", "--t0", "1", "--grid", "0:1:2"],
    ["density", "--n", "4", "--t", "0.3", "--grid", "0:1"],
    ["density", "--n", "4", "--t", "1.5", "--grid", "0:1:2"],
    ["correlation", "--n", "4", "--t0", "1", "--points", "0"],
    ["correlation", "--n", "4", "--t", "0.2", "--points", "0;abc"],
    ["kernel", "--n", "4", "--t", "0.2", "--grid", "0:1:2", "--w", "nan"],
    ["figure", "gpm"],
    ["bogus"],
    ["density", "--n", "x"],
])
def test_invalid_input_exit_2(args, capsys):
    assert main(args) == 2


def test_parsers():
    g = parse_grid("-1:1:3")
    assert (g.nx, g.ny, g.ymin) == (3, 1, 0.0)
    assert parse_complex("0.2-0.3j") == 0.2 - 0.3j
    assert parse_complex("1,2") == 1 + 2j
    assert parse_complex("1+2i") == 1 + 2j


def test_byte_identical_reruns_and_threads(tmp_path):
    cmd = [sys.executable, "-m", "nmkernel", "density", "--n", "16", "--t", "0.3", "--grid", "-2:2:40,-1:1:20"]
    outs = []
    for threads in ("1", "4", "4"):
        r = subprocess.run(cmd, capture_output=True, env={"NKL_THREADS": threads, "PATH": ""}, check=True)
        outs.append(r.stdout)
    assert outs[0] == outs[1] == outs[2]
    cmd = [sys.executable, "-m", "nmkernel", "sample", "--n", "5", "--t", "0.3", "--sweeps", "300",
           "--burnin", "100", "--thin", "50", "--seed", "9"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b and json.loads(a)["metadata"]["rng"]["seed"] == 9
