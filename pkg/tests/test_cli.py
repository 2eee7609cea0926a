import json
import subprocess
import sys

import pytest

from jjpump.cli import main

GRID = ["--flux-min", "-0.5", "--flux-max", "0.5", "--flux-count", "3",
        "--bias-min", "-1", "--bias-max", "1", "--bias-count", "3"]


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_steady_conservation(capsys):
    code, out, _ = run(capsys, "steady", "--geometry", "symmetric", "--K", "0.1", "--Ec", "0.1",
                       "--gamma-up", "100", "--bias", "1", "--flux", "0.25")
    assert code == 0
    d = json.loads(out)
    assert abs(d["currents"]["conservation_defect"]) < 1e-8
    assert d["converged"] and d["method"] == "fixed_point" and not d["fallback_used"]
    assert set(d["populations"]) == {"L", "D", "R", "U"}
    assert len(d["coherences"]) == 6
    assert "sign_convention" in d


def test_steady_asymmetric_no_pumping_without_charging(capsys):
    code, out, _ = run(capsys, "steady", "--geometry", "asymmetric", "--Ec", "0", "--bias", "3",
                       "--flux", "0.3")
    assert code == 0
    assert abs(json.loads(out)["currents"]["pump"]) < 1e-8


def test_missing_flag_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["evolve", "--geometry", "symmetric", "--out", "x.csv"])
    assert exc.value.code == 1
    assert "usage" in capsys.readouterr().err


def test_missing_geometry(capsys):
    code, _, err = run(capsys, "steady", "--K", "0.1")
    assert code == 1 and "--geometry" in err


def test_invalid_model_file(capsys, tmp_path):
    p = tmp_path / "m.json"
    p.write_text('{"geometry": "custom", "gamma": -1}')
    code, _, err = run(capsys, "steady", "--model", str(p))
    assert code == 1 and "schema" in err


def test_model_file(capsys, tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"geometry": "custom", "gamma": 1, "n_modes": 2, "gamma_up": [2, 1],
                             "tunneling": [{"from": 0, "to": 1, "re": 0.5}]}))
    code, out, _ = run(capsys, "steady", "--model", str(p), "--method", "linear_ec0",
                       "--manifest", str(tmp_path / "man.json"))
    assert code == 0
    d = json.loads(out)
    assert d["populations"] == pytest.approx({"0": 1.75, "1": 1.25})
    man = json.loads((tmp_path / "man.json").read_text())
    assert man["subcommand"] == "steady" and str(p) in man["input_hashes"]


def test_non_convergence_exit_code(capsys):
    code, out, _ = run(capsys, "steady", "--geometry", "symmetric", "--Ec", "0.1", "--bias", "1",
                       "--max-iter", "2", "--no-fallback")
    assert code == 2
    assert json.loads(out)["converged"] is False


def test_fallback_is_tagged(capsys):
    code, out, _ = run(capsys, "steady", "--geometry", "symmetric", "--Ec", "0.1", "--bias", "1",
                       "--flux", "0.25", "--max-iter", "2", "--tol", "1e-9")
    d = json.loads(out)
    assert code == 0 and d["fallback_used"] and d["method"] == "ode_relax"


def test_gamma_rescaling(capsys):
    base = ["steady", "--geometry", "symmetric", "--Ec", "0.1", "--bias", "1", "--flux", "0.25"]
    _, a, _ = run(capsys, *base)
    _, b, _ = run(capsys, *base, "--gamma", "2")
    na, nb = json.loads(a)["populations"], json.loads(b)["populations"]
    # populations are ratios of rates and do not change under a common rescaling
    assert nb == pytest.approx(na, rel=1e-8)


def test_evolve_zero_time(capsys, tmp_path):
    out = tmp_path / "t.csv"
    code, _, _ = run(capsys, "evolve", "--geometry", "symmetric", "--t-end", "0", "--out", str(out))
    assert code == 0
    rows = [ln for ln in out.read_text().splitlines() if not ln.startswith("#")]
    assert len(rows) == 2
    assert (tmp_path / "t.csv.manifest.json").exists()


def test_evolve_writes_trajectory(capsys, tmp_path):
    out = tmp_path / "t.csv"
    code, stdout, _ = run(capsys, "evolve", "--geometry", "asymmetric", "--K", "0", "--t-end", "2",
                          "--initial", "vacuum", "--out", str(out))
    assert code == 0
    rows = [ln.split(",") for ln in out.read_text().splitlines() if not ln.startswith("#")]
    # no tunneling: coherences stay exactly zero
    assert all(float(x) == 0 for r in rows[1:] for x in r[5:])
    assert json.loads(stdout)["samples"] == len(rows) - 1


def test_sweep_with_svg_and_symmetry(capsys, tmp_path):
    out, svg = tmp_path / "s.csv", tmp_path / "s.svg"
    code, stdout, _ = run(capsys, "sweep", "--geometry", "asymmetric", "--Ec", "0.1", *GRID,
                          "--out", str(out), "--svg", str(svg), "--symmetry-check")
    assert code == 0
    d = json.loads(stdout)
    assert d["points"] == 9 and d["non_converged"] == 0
    assert d["symmetry"]["flux_antisymmetry"] < 1e-8
    assert svg.read_text().startswith("<?xml")
    assert "# manifest: \"s.csv.manifest.json\"" in out.read_text()


def test_sweep_deterministic_across_threads(capsys, tmp_path):
    paths = []
    for i, threads in enumerate(("1", "3", "1")):
        p = tmp_path / f"r{i}.csv"
        code, _, _ = run(capsys, "sweep", "--geometry", "symmetric", "--Ec", "0.1", *GRID,
                         "--seed", "11", "--threads", threads, "--out", str(p),
                         "--manifest", str(tmp_path / "m.json"))
        assert code == 0
        paths.append(p)
    assert paths[0].read_bytes() == paths[1].read_bytes() == paths[2].read_bytes()


def test_scan_ec(capsys, tmp_path):
    out = tmp_path / "scan.csv"
    code, stdout, _ = run(capsys, "scan-ec", "--geometry", "asymmetric", "--Ec", "0,0.1",
                          "--K", "0.1", "--flux-step", "0.125", "--out", str(out))
    assert code == 0
    scan = json.loads(stdout)["scan"]
    assert scan[0]["max_abs_I_pump"] < 1e-8 < scan[1]["max_abs_I_pump"]
    assert "argmax_flux_ratio" in out.read_text()


def test_verify_charging_reports_without_failing(capsys):
    code, out, err = run(capsys, "verify", "--Ec", "0.05", "--cutoff", "12", "--oracle-only")
    d = json.loads(out)
    assert code == 0 and d["ok"]
    assert d["checks"][0]["value"] > 1e-6 and not d["checks"][0]["asserted"]
    assert "[INFO]" in err


def test_verify_dimension_guard(capsys):
    code, _, err = run(capsys, "verify", "--modes", "4", "--cutoff", "12")
    assert code == 1 and "exceeds" in err


@pytest.mark.slow
def test_verify_default_run():
    proc = subprocess.run([sys.executable, "-m", "jjpump", "verify"], capture_output=True,
                          text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["ok"]
