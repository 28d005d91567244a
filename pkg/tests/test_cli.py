import json
import math

import numpy as np
import pytest

from erst import cli
from erst.io import write_matrix_csv


@pytest.fixture
def files(tmp_path):
    write_matrix_csv(tmp_path / "cov.csv", ("eq", "cr"), 0.01 * np.array([[1.0, 0.25], [0.25, 1.0]]))
    write_matrix_csv(tmp_path / "eye.csv", ("a", "b"), np.eye(2))
    write_matrix_csv(tmp_path / "one.csv", ("x",), np.eye(1))
    write_matrix_csv(tmp_path / "ones.csv", ("a", "b"), np.ones((2, 2)))
    (tmp_path / "lin.ini").write_text("[factors]\nlabels = eq, cr\n[linear]\nomega = 1, -1\n")
    (tmp_path / "gamma.ini").write_text("[factors]\nlabels = eq, cr\n[quadratic]\nA = 2\n    0 -2\nB = 0 0\n")
    (tmp_path / "hard.ini").write_text("[factors]\nlabels = a, b\n[quadratic]\nA = 1\n    0 -1\nB = 0 0\n")
    (tmp_path / "oned.ini").write_text("[factors]\nlabels = x\n[quadratic]\nA = 2\nB = 1\n")
    (tmp_path / "zero.csv").write_text("eq,cr\n0,0\n")
    rng = np.random.default_rng(0)
    for name, days in (("panel.csv", 250), ("short.csv", 3)):
        x = rng.standard_normal((days, 4)) @ np.linalg.cholesky(0.3 + 0.7 * np.eye(4)).T * 0.01
        lines = ["date,s1,s2,v1,v2"]
        for k, row in enumerate(x):
            lines.append(f"2023-{1 + k // 28:02d}-{1 + k % 28:02d}," + ",".join(repr(float(v)) for v in row))
        (tmp_path / name).write_text("\n".join(lines) + "\n")
    return tmp_path


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--json")
    assert code == 0, err
    return json.loads(out)


class TestFit:
    def test_example(self, files, capsys):
        doc = run_json(capsys, "fit", "--cov", files / "cov.csv", "--shock", "eq=-0.10",
                       "--shock", "cr=-0.20", "--alpha-max", "0.5")
        assert doc["plausibility"] == pytest.approx(0.882, abs=5e-4)
        assert doc["fitted"] is True
        assert doc["fitted_maha_sq"] == pytest.approx(doc["quantile_maha_sq"], rel=1e-12)
        assert doc["ratio"] == pytest.approx(0.5700, abs=1e-4)

    def test_zero_scenario(self, files, capsys):
        doc = run_json(capsys, "fit", "--cov", files / "cov.csv", "--scenario", files / "zero.csv",
                       "--alpha-max", "0.5")
        assert doc["plausibility"] == 0.0 and doc["fitted"] is False

    def test_text_report(self, files, capsys):
        code, out, _ = run(capsys, "fit", "--cov", files / "cov.csv", "--shock", "eq=-0.1",
                           "--shock", "cr=-0.2", "--alpha-max", "0.5")
        assert code == 0
        assert "plausibility: 0.88155" in out

    def test_unknown_label(self, files, capsys):
        code, _, err = run(capsys, "fit", "--cov", files / "cov.csv", "--shock", "fx=0.1", "--alpha-max", "0.5")
        assert code == 2 and "'fx'" in err

    def test_non_pd(self, files, capsys):
        code, _, _ = run(capsys, "fit", "--cov", files / "ones.csv", "--shock", "a=0.1", "--alpha-max", "0.5")
        assert code == 3

    def test_bad_alpha(self, files, capsys):
        code, _, _ = run(capsys, "fit", "--cov", files / "cov.csv", "--alpha-max", "1.5")
        assert code == 2

    def test_missing_file(self, files, capsys):
        code, _, _ = run(capsys, "fit", "--cov", files / "nope.csv", "--alpha-max", "0.5")
        assert code == 2


class TestMaxerst:
    def test_linear(self, files, capsys):
        doc = run_json(capsys, "maxerst", "--cov", files / "cov.csv", "--portfolio", files / "lin.ini",
                       "--alpha", "0.95")
        assert doc["maxerst"] == pytest.approx(-0.2998, abs=1e-4)
        assert doc["comparators"]["var"] == pytest.approx(-0.20146, abs=1e-5)
        assert doc["comparators"]["es"] == pytest.approx(-0.25264, abs=1e-4)

    def test_zero_budget(self, files, capsys):
        doc = run_json(capsys, "maxerst", "--cov", files / "cov.csv", "--portfolio", files / "lin.ini",
                       "--historical-scenario", files / "zero.csv")
        assert doc["maxerst"] == 0.0 and doc["budget"]["q"] == 0.0
        assert doc["outcome"]["mu"] is None

    def test_pair(self, files, capsys):
        doc = run_json(capsys, "maxerst", "--cov", files / "cov.csv", "--portfolio", files / "gamma.ini",
                       "--alpha", "0.95", "--verify")
        assert doc["outcome"]["multiplicity"] == "pair"
        assert len(doc["outcome"]["scenarios"]) == 2
        assert doc["verify"]["status"] == "pass"

    def test_budget_required(self, files, capsys):
        code, _, _ = run(capsys, "maxerst", "--cov", files / "cov.csv", "--portfolio", files / "lin.ini")
        assert code == 2

    def test_student(self, files, capsys):
        doc = run_json(capsys, "maxerst", "--cov", files / "cov.csv", "--portfolio", files / "lin.ini",
                       "--alpha", "0.95", "--family", "student", "--nu", "4", "--mc-samples", "100000",
                       "--nsim", "20000")
        assert "var_mc" in doc["comparators"]


class TestLoss:
    def test_null(self, files, capsys):
        doc = run_json(capsys, "loss", "--cov", files / "one.csv", "--portfolio", files / "oned.ini", "--loss", "0")
        assert doc["maha_sq"] == 0.0 and doc["outcome"]["case"] == "null"

    def test_one_dimensional(self, files, capsys):
        doc = run_json(capsys, "loss", "--cov", files / "one.csv", "--portfolio", files / "oned.ini",
                       "--loss", "-0.1875", "--verify")
        assert doc["outcome"]["mu"] == pytest.approx(2.0)
        assert doc["maha_sq"] == pytest.approx(0.0625)
        assert doc["plausibility"] == pytest.approx(math.erf(0.25 / math.sqrt(2)))

    def test_hard_case(self, files, capsys):
        doc = run_json(capsys, "loss", "--cov", files / "eye.csv", "--portfolio", files / "hard.ini", "--loss", "-1")
        values = sorted(s["b"] for s in doc["outcome"]["scenarios"])
        assert values == pytest.approx([-math.sqrt(2), math.sqrt(2)])

    def test_profit(self, files, capsys):
        doc = run_json(capsys, "loss", "--cov", files / "eye.csv", "--portfolio", files / "hard.ini",
                       "--profit", "1", "--verify")
        assert doc["outcome"]["pnl"] == pytest.approx(1.0)

    def test_unreachable(self, files, capsys):
        code, _, err = run(capsys, "loss", "--cov", files / "one.csv", "--portfolio", files / "oned.ini",
                           "--loss", "-1")
        assert code == 4 and "-0.25" in err

    def test_positive_loss_rejected(self, files, capsys):
        code, _, _ = run(capsys, "loss", "--cov", files / "one.csv", "--portfolio", files / "oned.ini", "--loss", "1")
        assert code == 2


class TestSigma:
    def test_theta_zero_byte_identical(self, files, capsys):
        assert run(capsys, "sigma", "--panel", files / "panel.csv", "--out-dir", files / "a")[0] == 0
        assert run(capsys, "sigma", "--panel", files / "panel.csv", "--theta", "0", "--out-dir", files / "b")[0] == 0
        assert (files / "a" / "covariance.csv").read_bytes() == (files / "b" / "covariance.csv").read_bytes()

    def test_block_demo(self, files, capsys):
        doc = run_json(capsys, "sigma", "--panel", files / "panel.csv", "--block", "0:2:0.25",
                       "--out-dir", files / "c")
        assert doc["result"]["provenance"]["blocks"][0]["theta"] == 0.25
        prov = json.loads((files / "c" / "provenance.json").read_text())
        assert prov["result"]["positive_definite"] is True
        corr = np.loadtxt(files / "c" / "correlation.csv", delimiter=",", skiprows=1, usecols=range(1, 5))
        base = np.loadtxt(files / "a" / "correlation.csv", delimiter=",", skiprows=1, usecols=range(1, 5)) \
            if (files / "a").exists() else None
        assert corr[0, 1] > 0.3
        assert base is None or corr[2, 3] == pytest.approx(base[2, 3])

    def test_short_window(self, files, capsys):
        doc = run_json(capsys, "sigma", "--panel", files / "short.csv", "--out-dir", files / "d")
        assert doc["sample"]["positive_definite"] is False
        assert doc["sample"]["numerical_rank"] <= 2 == doc["sample"]["rank_bound"]
        assert doc["result"]["provenance"]["kind"] == "shrunk"
        assert doc["result"]["positive_definite"] is True

    def test_stress_needs_pd(self, files, capsys):
        code, _, _ = run(capsys, "sigma", "--panel", files / "short.csv", "--theta", "0.2", "--out-dir", files / "e")
        assert code == 3

    def test_calibrate(self, files, capsys):
        run(capsys, "sigma", "--panel", files / "panel.csv", "--theta", "0.25", "--out-dir", files / "f")
        doc = run_json(capsys, "sigma", "--panel", files / "panel.csv", "--out-dir", files / "g",
                       "--calibrate-theta", files / "f" / "covariance.csv")
        assert doc["calibration"]["theta"] == pytest.approx(0.25, abs=0.005)

    def test_bad_block(self, files, capsys):
        code, _, _ = run(capsys, "sigma", "--panel", files / "panel.csv", "--block", "0:2", "--out-dir", files / "h")
        assert code == 2


class TestSweep:
    def test_single_cell(self, files, capsys):
        code, out, _ = run(capsys, "sweep", "--rho", "0.5", "--beta", "1", "--nsim", "20000")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "rho,beta,var_mc,var_stderr,maxerst,ratio" and len(lines) == 2

    def test_empty_grid(self, capsys):
        code, _, _ = run(capsys, "sweep", "--rho", "", "--nsim", "20000")
        assert code == 2

    def test_output_file(self, files, capsys):
        code, out, _ = run(capsys, "sweep", "--rho=-0.5:0.5:0.5", "--beta", "0", "--nsim", "20000",
                           "--output", files / "sweep.csv")
        assert code == 0 and out == ""
        assert len((files / "sweep.csv").read_text().splitlines()) == 4


class TestContract:
    def test_deterministic(self, files, capsys):
        args = ("maxerst", "--cov", files / "cov.csv", "--portfolio", files / "gamma.ini", "--alpha", "0.9")
        assert run(capsys, *args)[1] == run(capsys, *args)[1]
        args = ("sweep", "--rho", "0,0.5", "--beta", "1.5", "--nsim", "20000")
        assert run(capsys, *args)[1] == run(capsys, *args)[1]

    def test_seed_from_environment(self, files, capsys, monkeypatch):
        args = ("sweep", "--rho", "0.2", "--beta", "1", "--nsim", "20000")
        default = run(capsys, *args)[1]
        monkeypatch.setenv("ERST_SEED", "7")
        changed = run(capsys, *args)[1]
        assert changed != default
        assert run(capsys, *args, "--seed", "42")[1] == default

    def test_self_audit_failure(self, files, capsys, monkeypatch):
        monkeypatch.setattr(cli, "pnl", lambda p, s: 123.0)
        code, _, err = run(capsys, "maxerst", "--cov", files / "cov.csv", "--portfolio", files / "lin.ini",
                           "--alpha", "0.95")
        assert code == 5 and "self-audit" in err

    def test_usage_error(self, capsys):
        assert run(capsys, "maxerst")[0] == 2
        assert run(capsys, "frobnicate")[0] == 2

    def test_version(self, capsys):
        code, out, _ = run(capsys, "--version")
        assert code == 0 and out.startswith("erst ")
