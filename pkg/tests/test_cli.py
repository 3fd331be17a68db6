import json
import math
import shutil
import subprocess
from importlib import resources

import pytest

from weakreal import counts_io, sampler
from weakreal.cli import CLIError, main, parse_grid

DATA = resources.files("weakreal") / "data"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--json")
    assert code == 0, err
    return json.loads(out)


class TestParseGrid:
    @pytest.mark.parametrize(
        "text, expected",
        [("0.1,0.2", [0.1, 0.2]), ("0:1:3", [0.0, 0.5, 1.0]), ("0.5", [0.5])],
    )
    def test_forms(self, text, expected):
        assert parse_grid(text) == pytest.approx(expected)

    @pytest.mark.parametrize("text", ["", "a,b", "0:1", "0:1:0"])
    def test_invalid(self, text):
        with pytest.raises(CLIError):
            parse_grid(text)


class TestPredict:
    def test_weak_limit(self, capsys):
        d = run_json(capsys, "predict", "--psi", math.pi / 4, "--theta", 0)
        assert d["lhs"] == pytest.approx(4 / 3, abs=1e-12)
        assert d["mode"] == "limit" and d["violated"]

    def test_no_entanglement(self, capsys):
        d = run_json(capsys, "predict", "--psi", 0, "--theta", 0.1)
        assert d["lhs"] == pytest.approx(1.0, abs=1e-12)
        assert not d["violated"]

    def test_indeterminate_exits_zero(self, capsys):
        code, out, err = run(capsys, "predict", "--psi", math.pi / 2, "--theta", 0)
        assert code == 0
        assert "indeterminate" in err and "indeterminate" in out

    def test_noise_inline(self, capsys):
        noise = json.dumps({"omega": 0.1})
        d = run_json(capsys, "predict", "--psi", math.pi / 4, "--theta", 0.1, "--noise-a", noise, "--noise-b", noise)
        assert d["lhs"] > 1

    def test_bad_noise(self, capsys):
        code, _, err = run(capsys, "predict", "--psi", 0.3, "--theta", 0.1, "--noise-a", '{"epsilon": 0.9}')
        assert code == 2 and "error" in err

    def test_out_of_range(self, capsys):
        code, _, _ = run(capsys, "predict", "--psi", 0.3, "--theta", 3.0)
        assert code == 2


class TestSweep:
    def test_rows(self, capsys):
        d = run_json(capsys, "sweep", "--psi-grid", "0:1.5:4", "--lambda-grid", "0,0.1,0.5")
        assert len(d["rows"]) == 12

    def test_csv_and_manifest(self, capsys, tmp_path):
        out = tmp_path / "sweep.csv"
        code, _, _ = run(capsys, "sweep", "--psi-grid", "0.3,1.5707963267948966", "--lambda-grid", "0", "--out", out)
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "# weakreal/1" and len(lines) == 4
        manifest = json.loads((tmp_path / "sweep.csv.manifest.json").read_text())
        assert manifest["command"] == "sweep"


class TestSimulate:
    def test_deterministic(self, capsys):
        argv = ("simulate", "--psi", 0.785, "--theta", 0.1, "--shots", 500, "--reps", 2, "--seed", 5)
        assert run_json(capsys, *argv) == run_json(capsys, *argv)
        assert run_json(capsys, *argv) != run_json(capsys, *argv[:-1], 6)

    def test_outputs(self, capsys, tmp_path):
        code, _, err = run(capsys, "simulate", "--psi", 0.785, "--theta", 0.1, "--shots", 200, "--reps", 2, "--jobs", 2, "--out", tmp_path)
        assert code == 0, err
        names = sorted(p.name for p in tmp_path.iterdir())
        assert names == [
            "counts_AB_job0.json", "counts_AB_job1.json", "counts_BA_job0.json", "counts_BA_job1.json",
            "estimates_AB.csv", "estimates_BA.csv", "manifest.json",
        ]
        t = counts_io.read(tmp_path / "counts_AB_job1.json")
        assert t.job == 1 and t.seed == 0

    def test_config_file(self, capsys, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"psi": 0.785, "theta": 0.2, "shots": 300, "reps": 1, "orders": ["BA"]}))
        d = run_json(capsys, "simulate", cfg)
        assert [r["order"] for r in d["reports"]] == ["BA"]

    def test_missing_psi(self, capsys):
        code, _, err = run(capsys, "simulate", "--theta", 0.1)
        assert code == 2 and "psi" in err


class TestAnalyze:
    def test_roundtrip_matches_library(self, capsys, tmp_path):
        run(capsys, "simulate", "--psi", 0.785, "--theta", 0.1, "--shots", 1000, "--reps", 3, "--out", tmp_path, "--seed", 2)
        files = sorted(tmp_path.glob("counts_AB_*.json"))
        d = run_json(capsys, "analyze", *files)
        est = sampler.estimate([counts_io.read(f) for f in files])
        (rep,) = d["reports"]
        assert rep["estimates"]["abc"]["value"] == est.abc.value
        assert rep["lhs"] == sampler.violation_significance(est).lhs.value

    def test_ionq_fixture(self, capsys, tmp_path):
        for t in sampler.ionq_synthetic_counts("AB"):
            counts_io.write(t, tmp_path / "ionq_AB.json")
        d = run_json(capsys, "analyze", tmp_path / "ionq_AB.json", "--bootstrap", 100)
        rep = d["reports"][0]
        assert rep["lhs"] == pytest.approx(1.272, abs=0.005)
        assert rep["lhs_sigma"] == pytest.approx(0.035, rel=0.1)
        assert rep["lhs_sigma_bootstrap"] >= 0

    def test_schema_error(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        d = json.loads(counts_io.dumps(sampler.sample_counts(sampler.ProtocolConfig(0.7, 0.1), 10, 1, 1, orders=("AB",))[0]))
        d["runs"][2]["sign_b"] = 3
        bad.write_text(json.dumps(d))
        code, _, err = run(capsys, "analyze", bad)
        assert code == 2
        assert "runs[2].sign_b" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "analyze", tmp_path / "nope.json")
        assert code == 2


class TestCalibrate:
    def test_fixture(self, capsys, tmp_path):
        out = tmp_path / "cal.json"
        code, _, err = run(capsys, "calibrate", DATA / "tetrahedron.json", "--out", out)
        assert code == 0, err
        d = json.loads(out.read_text())
        assert d["anticommutation_residual"] < 1e-12
        assert len(d["pbar"]) == 3 and len(d["mbar"]) == 4
        assert (tmp_path / "cal.json.manifest.json").exists()

    def test_bad_fixture(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"lambda": 0.1}))
        code, _, err = run(capsys, "calibrate", bad)
        assert code == 2 and "fixture" in err


class TestContinuum:
    def test_cat_sweep(self, capsys):
        d = run_json(capsys, "continuum", "cat-sweep", "--points", 6)
        assert d["header"] == ["a", "ratio"] and len(d["rows"]) == 6
        for a, r in d["rows"]:
            assert r == pytest.approx((1 - a * a) / 2)

    @pytest.mark.parametrize("task, n", [("wigner", 16), ("fock", 11), ("responsive", 4)])
    def test_tasks(self, capsys, task, n):
        d = run_json(capsys, "continuum", task, "--points", 4)
        assert len(d["rows"]) == n

    def test_csv(self, capsys, tmp_path):
        out = tmp_path / "fock.csv"
        code, _, _ = run(capsys, "continuum", "fock", "--nmax", 3, "--out", out)
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "# weakreal/1" and lines[1] == "n,max_alpha_second,violates"
        assert all(line.endswith("false") for line in lines[2:])


@pytest.mark.skipif(shutil.which("weakreal") is None, reason="console script not installed")
def test_console_script():
    res = subprocess.run(["weakreal", "predict", "--psi", "0.7853981633974483", "--theta", "0", "--json"],
                         capture_output=True, text=True, check=True)
    assert json.loads(res.stdout)["lhs"] == pytest.approx(4 / 3)
