import csv
import io
import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from wassgsa.cli import config_to_argv, main, parse_u
from wassgsa.designio import load_design, save_design
from wassgsa.distributions import EmpiricalDistribution
from wassgsa.errors import DesignFormatError
from wassgsa.estimators import PickFreezeDesign, RankDesign, pick_freeze_estimate, rank_estimate
from wassgsa.indices import OutputSample, family_cvm, family_quantile_eval, family_sobol, family_wasserstein_ball


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestDesignFiles:
    def test_scalar_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        d = PickFreezeDesign(rng.normal(size=50) / 3, rng.normal(size=50) * np.pi, [rng.normal(size=50)])
        save_design(tmp_path / "d.csv", d)
        back = load_design(tmp_path / "d.csv")
        assert back.m == 1
        a = pick_freeze_estimate(d, family_cvm())
        b = pick_freeze_estimate(back, family_cvm())
        assert (a.numerator, a.denominator, a.value) == (b.numerator, b.denominator, b.value)

    def test_rank_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        x = rng.random(40)
        d = RankDesign(x, np.sin(7 * x) + rng.normal(size=40) / 10)
        save_design(tmp_path / "r.csv", d)
        back = load_design(tmp_path / "r.csv")
        assert isinstance(back, RankDesign)
        assert rank_estimate(d, family_sobol()).value == rank_estimate(back, family_sobol()).value

    def test_long_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        z = OutputSample([EmpiricalDistribution(rng.normal(size=5) / 7) for _ in range(12)])
        zu = OutputSample([EmpiricalDistribution(rng.normal(size=5) / 7) for _ in range(12)])
        d = PickFreezeDesign(z, zu)
        save_design(tmp_path / "l.csv", d)
        with open(tmp_path / "l.csv") as fh:
            assert fh.readline().strip() == "replicate_id,branch,draw_index,value"
        back = load_design(tmp_path / "l.csv")
        for fam in (family_wasserstein_ball(), family_quantile_eval()):
            assert pick_freeze_estimate(d, fam, seed=3).value == pick_freeze_estimate(back, fam, seed=3).value

    def test_long_rank_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        x = rng.random(10)
        d = RankDesign(x, OutputSample([EmpiricalDistribution(xx + rng.normal(size=4)) for xx in x]))
        save_design(tmp_path / "lr.csv", d)
        back = load_design(tmp_path / "lr.csv")
        assert rank_estimate(d, family_wasserstein_ball()).value == rank_estimate(back, family_wasserstein_ball()).value

    def test_two_columns_is_m0(self, tmp_path):
        (tmp_path / "d.csv").write_text("z,z_pf\n1,2\n3,4\n5,5\n0,1\n")
        d = load_design(tmp_path / "d.csv")
        assert (d.N, d.m) == (4, 0)

    def test_aux_columns(self, tmp_path):
        (tmp_path / "d.csv").write_text("z,z_pf,aux_1,aux_2\n1,2,0,1\n3,4,1,1\n5,5,2,0\n")
        assert load_design(tmp_path / "d.csv").m == 2

    @pytest.mark.parametrize("text,row,column", [
        ("z,z_pf\n1,2\n3\n", 3, None),
        ("z,z_pf\n1,2\n3,abc\n", 3, "z_pf"),
        ("z,q\n1,2\n", 1, None),
        ("z,z_pf,aux_2\n1,2,3\n", 1, 3),
        ("replicate_id,branch,draw_index,value\n0,plain,0,1\n0,other,0,1\n", 3, "branch"),
        ("replicate_id,branch,draw_index,value\n0,plain,0,1\n0,plain,0,2\n", 3, None),
    ])
    def test_errors_locate_the_cell(self, tmp_path, text, row, column):
        (tmp_path / "d.csv").write_text(text)
        with pytest.raises(DesignFormatError) as info:
            load_design(tmp_path / "d.csv")
        assert info.value.row == row
        assert info.value.column == column

    def test_mismatched_draw_counts(self, tmp_path):
        (tmp_path / "d.csv").write_text(
            "replicate_id,branch,draw_index,value\n0,plain,0,1\n0,plain,1,2\n1,plain,0,1\n0,pf,0,1\n1,pf,0,1\n")
        with pytest.raises(DesignFormatError):
            load_design(tmp_path / "d.csv")


class TestEstimateCommand:
    def test_matches_library(self, tmp_path, capsys):
        rng = np.random.default_rng(4)
        x = rng.normal(size=200)
        d = PickFreezeDesign(x + rng.normal(size=200), x + rng.normal(size=200))
        save_design(tmp_path / "d.csv", d)
        code, out, _ = run(["estimate", "--design", tmp_path / "d.csv", "--family", "sobol", "--no-timestamp"], capsys)
        assert code == 0
        (row,) = rows_of(out)
        assert float(row["estimate"]) == pick_freeze_estimate(d, family_sobol()).value
        assert row["method"] == "pf" and row["N"] == "200"

    def test_ragged_file_exit_code(self, tmp_path, capsys):
        (tmp_path / "d.csv").write_text("z,z_pf\n1,2\n3,4,5\n")
        code, _, err = run(["estimate", "--design", tmp_path / "d.csv"], capsys)
        assert code == 2
        rec = json.loads(err.strip().splitlines()[-1])
        assert rec["error"] == "DesignFormatError" and rec["row"] == 3

    def test_estimator_error_goes_to_error_column(self, tmp_path, capsys):
        (tmp_path / "d.csv").write_text("z,z_pf\n1,1\n1,1\n1,1\n")
        code, out, _ = run(["estimate", "--design", tmp_path / "d.csv", "--no-timestamp"], capsys)
        assert code == 0
        (row,) = rows_of(out)
        assert row["error"].startswith("DegenerateOutputError") and row["estimate"] == "nan"

    def test_method_needs_matching_design(self, tmp_path, capsys):
        (tmp_path / "d.csv").write_text("z,z_pf\n1,2\n3,4\n")
        code, _, _ = run(["estimate", "--design", tmp_path / "d.csv", "--method", "rank"], capsys)
        assert code == 2


class TestRuns:
    def test_toy_rows(self, capsys):
        code, out, err = run(["toy", "--N", 64, "--R", 3, "--method", "pf", "--u", "1", "13", "--no-timestamp"],
                             capsys)
        assert code == 0
        rows = rows_of(out)
        assert [r["u"] for r in rows] == ["{1}", "{1,3}"] * 3
        assert {"analytic", "sq_error", "numerator", "denominator", "seed"} <= set(rows[0])
        assert "wall_time" not in rows[0]
        assert float(rows[0]["analytic"]) == pytest.approx(0.7050359712, abs=1e-9)
        assert "median_sq_error" in err

    def test_byte_identical(self, tmp_path, capsys):
        args = ["toy", "--N", 50, "--n", 5, "--R", 2, "--seed", 3, "--no-timestamp"]
        run(args + ["-o", tmp_path / "a.csv"], capsys)
        run(args + ["-o", tmp_path / "b.csv"], capsys)
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_timestamp_header(self, capsys):
        _, out, _ = run(["toy", "--N", 20, "--u", "2"], capsys)
        assert out.startswith("# generated ")
        assert "wall_time" in out.splitlines()[1]

    def test_workers_keep_order(self, capsys, monkeypatch):
        args = ["toy", "--N", 40, "--R", 4, "--no-timestamp"]
        _, serial, _ = run(args, capsys)
        monkeypatch.setenv("WASSGSA_WORKERS", "2")
        _, pooled, _ = run(args, capsys)
        assert serial == pooled

    def test_json(self, capsys):
        code, out, _ = run(["gremaud", "--N", 200, "--u", "1", "--format", "json", "--no-timestamp"], capsys)
        assert code == 0
        doc = json.loads(out)
        assert list(doc) == ["rows"] and doc["rows"][0]["u"] == "{1}"

    def test_second_level_layout(self, capsys):
        code, out, _ = run(["second-level", "--N", 30, "--n", 10, "--no-timestamp"], capsys)
        assert code == 0
        assert [r["u"] for r in rows_of(out)] == ["{1}", "{2}", "{3}", "{1,2}", "{1,3}", "{2,3}"]

    def test_rank_requires_first_order(self, capsys):
        code, _, err = run(["gremaud", "--method", "rank", "--u", "12"], capsys)
        assert code == 2 and "first-order" in err

    def test_calibrate(self, capsys):
        code, out, _ = run(["calibrate", "--N", 2, "--regime", "uniform_support"], capsys)
        assert (code, out.strip()) == (0, "46")
        code, _, err = run(["calibrate", "--N", 1000, "--regime", "uniform_support", "--ceiling", 100], capsys)
        assert code == 1 and json.loads(err)["required_n"] > 100

    def test_bad_flag(self, capsys):
        code, _, _ = run(["toy", "--N", 0], capsys)
        assert code == 2

    def test_parse_u(self):
        assert parse_u("13") == parse_u("1,3") == parse_u("{1,3}") == (1, 3)


class TestConfig:
    def test_equivalent_to_flags(self, tmp_path, capsys):
        (tmp_path / "run.cfg").write_text(
            "# toy run\ncommand = toy\nN = 40\nu = 1 3\nmethod = pf\nno_timestamp = true\n")
        _, from_file, _ = run(["--config", tmp_path / "run.cfg"], capsys)
        _, from_flags, _ = run(["toy", "--N", 40, "--u", "1", "3", "--method", "pf", "--no-timestamp"], capsys)
        assert from_file == from_flags

    def test_command_line_wins(self, tmp_path, capsys):
        (tmp_path / "run.cfg").write_text("command = toy\nN = 40\nno_timestamp = true\n")
        _, out, _ = run(["--config", tmp_path / "run.cfg", "--N", 30], capsys)
        assert rows_of(out)[0]["N"] == "30"

    @pytest.mark.parametrize("text,row", [("command = toy\nN 40\n", 2), ("command = toy\nno_timestamp = maybe\n", 2),
                                          ("command = toy\n = 3\n", 2), ("N = 4\n", None)])
    def test_errors_name_the_line(self, tmp_path, text, row):
        (tmp_path / "bad.cfg").write_text(text)
        with pytest.raises(DesignFormatError) as info:
            config_to_argv(tmp_path / "bad.cfg")
        assert info.value.row == row

    def test_error_exit(self, tmp_path, capsys):
        (tmp_path / "bad.cfg").write_text("command = toy\nN 40\n")
        code, _, err = run(["--config", tmp_path / "bad.cfg"], capsys)
        assert code == 2 and json.loads(err)["row"] == 2


@pytest.mark.skipif(shutil.which("wassgsa") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["wassgsa", "calibrate", "--N", "10", "--regime", "generic"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "100"


def test_module_entry():
    proc = subprocess.run([sys.executable, "-m", "wassgsa.cli", "calibrate", "--N", "10",
                           "--regime", "gaussian_mixture"], capture_output=True, text=True)
    assert proc.stdout.strip() == "163"
