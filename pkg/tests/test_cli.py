import io
import json

import pandas as pd
import pytest

from medtest import cli
from medtest.analysis import MediationAnalysis
from medtest.cli import main, read_csv_columns, write_dataset_csv
from medtest.errors import MissingColumnError, NonNumericCellError
from medtest.simulate import MetricEstimate
from medtest.utils.constants import NaPolicy

SMALL_PLAN = {
    "name": "small",
    "study": "size_power",
    "family": "linear",
    "reps": 8,
    "scenarios": [
        {"n": 200, "alpha": [0.0], "beta": [0.0]},
        {"n": 200, "alpha": [0.3], "beta": [0.3]},
    ],
}


@pytest.fixture
def plan_path(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps({**SMALL_PLAN, "base_seed": 3}), encoding="utf-8")
    return path


@pytest.fixture
def pvalue_csv(tmp_path):
    path = tmp_path / "pvalues.csv"
    path.write_text("p\n0.3\n0.1\n0.2\n", encoding="utf-8")
    return path


def test_version(capsys):
    assert main(["--version"]) == 0
    assert capsys.readouterr().out.strip() != ""


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["bogus"],
        ["power", "--mu-alpha", "1"],
        ["analyze", "--data", "x.csv", "--exposure", "X", "--mediators", "M"],
    ],
)
def test_usage_errors(argv):
    assert main(argv) == 2


class TestPower:
    def test_double_null(self, capsys):
        argv = [
            "power",
            "--mu-alpha", "0",
            "--mu-beta", "0",
            "--prob-tmax-ge", "0",
            "--draws", "20000",
            "--format", "json",
        ]  # fmt: skip
        assert main(argv) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["JS"] == pytest.approx(0.0025)
        assert payload["AJS"] == pytest.approx(0.05)
        assert payload["ASobel"] == pytest.approx(0.05, abs=0.01)
        assert payload["ASobel_se"] > 0.0

    def test_csv_output(self, capsys):
        argv = ["power", "--mu-alpha", "3", "--mu-beta", "3", "--draws", "10000"]
        assert main(argv) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "method,power,standard_error"
        assert [line.split(",")[0] for line in lines[1:]] == ["JS", "AJS", "ASobel"]

    def test_too_few_draws(self):
        argv = ["power", "--mu-alpha", "1", "--mu-beta", "1", "--draws", "100"]
        assert main(argv) == 2

    def test_seeded_runs_agree(self, capsys, monkeypatch):
        argv = ["power", "--mu-alpha", "2", "--mu-beta", "2", "--draws", "10000"]
        monkeypatch.setenv("MEDTEST_SEED", "17")
        main(argv + ["--format", "json"])
        from_env = json.loads(capsys.readouterr().out)
        main(argv + ["--format", "json", "--seed", "17"])
        from_flag = json.loads(capsys.readouterr().out)
        assert from_env["ASobel"] == from_flag["ASobel"]


class TestAnalyze:
    def test_bundled_survival_data(self, survival_csv, capsys):
        argv = [
            "analyze",
            "--data", str(survival_csv),
            "--exposure", "exposure",
            "--mediators", "M1", "M2", "M3", "M4", "M5", "M6", "M7",
            "--covariates", "age",
            "--family", "cox",
            "--time", "time",
            "--event", "event",
        ]  # fmt: skip
        assert main(argv) == 0
        output = capsys.readouterr().out
        assert output.startswith("# rows_dropped=")
        frame = pd.read_csv(io.StringIO(output), comment="#")
        assert len(frame) == 7
        assert list(frame["name"]) == [f"M{k}" for k in range(1, 8)]
        assert (frame["p_ajs"] <= frame["p_js"]).all()
        assert (frame["asobel_lo"] >= frame["sobel_lo"]).all()

    def test_csv_round_trip_matches_the_library(self, linear_dataset, tmp_path, capsys):
        path = tmp_path / "linear.csv"
        write_dataset_csv(linear_dataset, str(path))
        argv = [
            "analyze",
            "--data", str(path),
            "--exposure", "X",
            "--mediators", "M1", "M2", "M3",
            "--family", "linear",
            "--outcome", "Y",
            "--format", "json",
        ]  # fmt: skip
        assert main(argv) == 0
        payload = json.loads(capsys.readouterr().out)
        expected = MediationAnalysis("linear").report(linear_dataset)
        assert payload["rows_dropped"] == 0
        for row, want in zip(payload["mediators"], expected.mediators):
            assert row["p_ajs"] == want.p_ajs
            assert row["p_asobel"] == want.p_asobel
            assert row["asobel_hi"] == want.asobel_hi

    def test_table_format(self, linear_dataset, tmp_path, capsys):
        path = tmp_path / "linear.csv"
        write_dataset_csv(linear_dataset, str(path))
        argv = [
            "analyze",
            "--data", str(path),
            "--exposure", "X",
            "--mediators", "M1", "M2", "M3",
            "--family", "linear",
            "--outcome", "Y",
            "--format", "table",
        ]  # fmt: skip
        assert main(argv) == 0
        header = capsys.readouterr().out.splitlines()[0]
        assert header.startswith("family=linear n=300 rows_dropped=0 d=3")

    def test_csv_output_notes_dropped_rows(self, linear_dataset, tmp_path, capsys):
        lines = write_dataset_csv(linear_dataset).splitlines()
        lines[1] = "NA" + lines[1][lines[1].index(","):]
        path = tmp_path / "gaps.csv"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        argv = [
            "analyze",
            "--data", str(path),
            "--exposure", "X",
            "--mediators", "M1", "M2", "M3",
            "--family", "linear",
            "--outcome", "Y",
        ]  # fmt: skip
        assert main(argv) == 0
        output = capsys.readouterr().out
        assert output.splitlines()[0] == "# rows_dropped=1"
        frame = pd.read_csv(io.StringIO(output), comment="#")
        assert len(frame) == 3

    def test_missing_file(self, tmp_path):
        argv = [
            "analyze",
            "--data", str(tmp_path / "absent.csv"),
            "--exposure", "X",
            "--mediators", "M1",
            "--family", "linear",
            "--outcome", "Y",
        ]  # fmt: skip
        assert main(argv) == 3

    def test_missing_column(self, linear_dataset, tmp_path, capsys):
        path = tmp_path / "linear.csv"
        write_dataset_csv(linear_dataset, str(path))
        argv = [
            "analyze",
            "--data", str(path),
            "--exposure", "X",
            "--mediators", "M1", "M9",
            "--family", "linear",
            "--outcome", "Y",
        ]  # fmt: skip
        assert main(argv) == 3
        assert "M9" in capsys.readouterr().err

    def test_level_out_of_range(self, linear_dataset, tmp_path):
        path = tmp_path / "linear.csv"
        write_dataset_csv(linear_dataset, str(path))
        argv = [
            "analyze",
            "--data", str(path),
            "--exposure", "X",
            "--mediators", "M1",
            "--family", "linear",
            "--outcome", "Y",
            "--delta", "1.5",
        ]  # fmt: skip
        assert main(argv) == 2


class TestReadCsvColumns:
    @pytest.fixture(autouse=True)
    def _init_csv(self, tmp_path):
        self.path = tmp_path / "cells.csv"
        self.path.write_text("X,M1,Y\n1,2,3\n4,NA,6\n7,8,9\n", encoding="utf-8")

    def test_drop_rows(self):
        frame, dropped = read_csv_columns(str(self.path), ["X", "M1"])
        assert dropped == 1
        assert list(frame["X"]) == [1.0, 7.0]

    def test_unused_columns_do_not_drop_rows(self):
        frame, dropped = read_csv_columns(str(self.path), ["X", "Y"])
        assert dropped == 0
        assert len(frame) == 3

    def test_error_policy_names_the_cell(self):
        with pytest.raises(NonNumericCellError, match="at row 2, column 'M1'"):
            read_csv_columns(str(self.path), ["X", "M1"], NaPolicy.ERROR)

    def test_missing_column(self):
        with pytest.raises(MissingColumnError):
            read_csv_columns(str(self.path), ["Z"])

    def test_error_policy_exit_code(self):
        argv = [
            "analyze",
            "--data", str(self.path),
            "--exposure", "X",
            "--mediators", "M1",
            "--family", "linear",
            "--outcome", "Y",
            "--na-policy", "error",
        ]  # fmt: skip
        assert main(argv) == 3


class TestQq:
    def test_pairs(self, pvalue_csv, capsys):
        assert main(["qq", str(pvalue_csv)]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "uniform_quantile,sorted_p"
        assert [float(line.split(",")[1]) for line in lines[1:]] == [0.1, 0.2, 0.3]

    def test_out_of_range(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("p\n0.3\n1.2\n", encoding="utf-8")
        assert main(["qq", str(path)]) == 3
        assert "row 2" in capsys.readouterr().err

    def test_several_columns_need_a_choice(self, tmp_path):
        path = tmp_path / "two.csv"
        path.write_text("p,q\n0.3,0.4\n", encoding="utf-8")
        assert main(["qq", str(path)]) == 3
        assert main(["qq", str(path), "--column", "q"]) == 0


class TestSimulate:
    def test_writes_table_and_summary(self, plan_path, tmp_path):
        out = tmp_path / "results" / "small"
        assert main(["simulate", str(plan_path), "--out", str(out)]) == 0
        table = pd.read_csv(tmp_path / "results" / "small.csv")
        assert list(table["metric"]) == ["size", "power"]
        assert "elapsed" not in table.columns
        payload = json.loads((tmp_path / "results" / "small.json").read_text())
        assert payload["plan"] == "small"
        assert len(payload["summaries"]) == 2

    def test_runs_are_deterministic(self, plan_path, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", str(plan_path), "--out", str(first)]) == 0
        argv = ["simulate", str(plan_path), "--threads", "2", "--out", str(second)]
        assert main(argv) == 0
        csv_a = (tmp_path / "a.csv").read_text()
        assert csv_a == (tmp_path / "b.csv").read_text()

    def test_flags_override_the_plan(self, plan_path, capsys):
        argv = ["simulate", str(plan_path), "--reps", "3", "--seed", "9"]
        argv += ["--format", "json"]
        assert main(argv) == 0
        summaries = json.loads(capsys.readouterr().out)["summaries"]
        assert all(s["reps"] == 3 for s in summaries)
        assert all(s["scenario"]["base_seed"] == 9 for s in summaries)

    def test_environment_seed(self, tmp_path, monkeypatch):
        path = tmp_path / "unseeded.json"
        path.write_text(json.dumps(SMALL_PLAN), encoding="utf-8")
        monkeypatch.setenv("MEDTEST_SEED", "42")
        plan = cli._load_plan(str(path), seed=None, reps=None)
        assert {s.base_seed for s in plan.scenarios} == {42}
        seeded = cli._load_plan(str(path), seed=7, reps=None)
        assert {s.base_seed for s in seeded.scenarios} == {7}

    def test_plan_seed_wins_over_the_environment(self, plan_path, monkeypatch):
        monkeypatch.setenv("MEDTEST_SEED", "42")
        plan = cli._load_plan(str(plan_path), seed=None, reps=None)
        assert {s.base_seed for s in plan.scenarios} == {3}

    def test_invalid_environment_seed(self, tmp_path, monkeypatch):
        path = tmp_path / "unseeded.json"
        path.write_text(json.dumps(SMALL_PLAN), encoding="utf-8")
        monkeypatch.setenv("MEDTEST_SEED", "-4")
        assert main(["simulate", str(path)]) == 2

    def test_unreadable_plan(self, tmp_path):
        assert main(["simulate", str(tmp_path / "absent.json")]) == 2

    def test_stdout_takes_the_requested_format(self, plan_path, capsys):
        assert main(["simulate", str(plan_path), "--format", "json"]) == 0
        assert json.loads(capsys.readouterr().out)["plan"] == "small"

    def test_invalid_result_model_is_a_usage_error(
        self, plan_path, monkeypatch, capsys
    ):
        def broken_run(*args, **kwargs):
            return [MetricEstimate(metric="size", method="AJS", value=1.5)]

        monkeypatch.setattr(cli, "run_plan", broken_run)
        assert main(["simulate", str(plan_path)]) == 2
        assert "medtest simulate" in capsys.readouterr().err
