import io
import json
from fractions import Fraction as F

import pytest

from drsys.cli import main
from drsys.io import read_dist, read_table
from drsys.polymode import poly_initial, poly_iterate
from drsys.model import StarLaw


def write_spec(tmp_path, p, m=2, k0=2):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps({"m": m, "star": {"kind": "dirac", "k0": k0}, "p": p}))
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr()


def test_iterate_zero_spec(tmp_path, capsys):
    code, out = run(capsys, "iterate", "--spec", write_spec(tmp_path, "0"), "--n", "5")
    assert code == 0
    _, rows = read_table(io.StringIO(out.out))
    assert len(rows) == 6 and all(r["P0"] == "1" and r["mean"] == "0" for r in rows)


def test_iterate_matches_symbolic_evaluation(tmp_path, capsys):
    code, out = run(capsys, "iterate", "--spec", write_spec(tmp_path, "1/5"), "--n", "3")
    assert code == 0
    _, rows = read_table(io.StringIO(out.out))
    pd = poly_iterate(poly_initial(2, StarLaw.dirac(2)), 3)[-1]
    assert F(rows[3]["P0"]) == pd.mass(0)(F(1, 5))


def test_iterate_writes_distribution_files(tmp_path, capsys):
    outdir = tmp_path / "run"
    code, _ = run(capsys, "iterate", "--spec", write_spec(tmp_path, "1/5"), "--n", "2",
                  "--out", str(outdir))
    assert code == 0
    with open(outdir / "dist_n1.csv") as fh:
        assert read_dist(fh).as_dict() == {0: F(16, 25), 1: F(8, 25), 3: F(1, 25)}
    assert (outdir / "moments.csv").exists()


def test_missing_spec_is_usage_error(tmp_path, capsys):
    code, out = run(capsys, "iterate", "--spec", str(tmp_path / "nope.json"))
    assert code == 2
    assert "not found" in out.err


def test_free_energy_deterministic_orbit(tmp_path, capsys):
    code, out = run(capsys, "free-energy", "--spec", write_spec(tmp_path, "1"), "--N", "10")
    assert code == 0
    _, rows = read_table(io.StringIO(out.out))
    assert rows[-1]["L"] == "1" and F(rows[-1]["U"]) == 1 + F(1, 1024)


def test_free_energy_grid(capsys):
    code, out = run(capsys, "free-energy", "--N", "6", "--p-grid", "0:1/2:3")
    assert code == 0
    _, rows = read_table(io.StringIO(out.out))
    assert [r["p"] for r in rows] == ["0", "1/4", "1/2"]


def test_empty_grid_is_usage_error(capsys):
    code, _ = run(capsys, "free-energy", "--p-grid", "0:1:0")
    assert code == 2


def test_float_mode_accepts_decimal_spec(tmp_path, capsys):
    code, out = run(capsys, "free-energy", "--spec", write_spec(tmp_path, 0.15), "--mode", "float",
                    "--N", "12")
    assert code == 0
    _, rows = read_table(io.StringIO(out.out))
    assert float(rows[-1]["U"]) < 1e-2


def test_derivative_table(capsys):
    code, out = run(capsys, "derivative", "--N", "2", "--k", "1", "--p0", "1/2")
    assert code == 0
    _, rows = read_table(io.StringIO(out.out))
    first = [r for r in rows if r["n"] == "0" and r["k"] == "1"][0]
    assert first["value"] == "-1"


def test_verify_filter_and_json(capsys):
    code, out = run(capsys, "verify", "--suite", "mean,brackets")
    assert code == 0
    report = json.loads(out.out)
    assert report["passed"] and {c["suite"] for c in report["checks"]} == {"mean", "brackets"}


def test_verify_unknown_suite(capsys):
    code, _ = run(capsys, "verify", "--suite", "nonsense")
    assert code == 2


def test_verify_corrupted_golden_fails_by_name(tmp_path, capsys):
    bad = tmp_path / "golden.json"
    bad.write_text(json.dumps({"critical_p[m=2,dirac2]": "1/4"}))
    code, out = run(capsys, "verify", "--suite", "golden", "--golden", str(bad))
    assert code == 1
    failed = [c for c in json.loads(out.out)["checks"] if c["status"] == "fail"]
    assert [c["name"] for c in failed] == ["critical_p[m=2,dirac2]"]


def test_mixture_experiment(capsys):
    code, out = run(capsys, "question5", "--n", "0", "--p-grid", "0:1:3")
    assert code == 0
    _, rows = read_table(io.StringIO(out.out))
    # E_lambda X - E_mu X for the built-in pair
    assert {r["dmean_dp"] for r in rows} == {str(F(1, 2) + F(3, 34) - F(2, 5))}


def test_mixture_rejects_equal_laws(tmp_path, capsys):
    path = tmp_path / "mix.json"
    path.write_text(json.dumps({"m": 2, "mu": {"0": "4/5", "2": "1/5"}, "lambda": {"0": "4/5", "2": "1/5"}}))
    code, _ = run(capsys, "question5", "--spec", str(path), "--n", "1")
    assert code == 2


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
