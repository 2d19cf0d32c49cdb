import json
from pathlib import Path

import pytest

from source_select.cli import emit_plot_tables, main
from source_select.errors import EmptyResults

GAUSS_CFG = """
kind = gaussian
d = 4
n_sources = 3
sizes = 400
mean_shifts = 0, 0.5, 2.0
mean_shift_pattern = 0, 1, -1, 0
label_weights = 0, 1.0, 1.0, 0.5
label_flip_rate = 0, 0.05, 0.4
group_quantiles = 0.5
seed = 5
"""

SINE_CFG = """
kind = sine
n_a = 10
n_b = 90
noise_sd = 0.1
test_size = 120
"""

PLAN_CFG = """
mode = sequential
order = s00, s01
grid = 200, 400, 600
metric = kl_ratio_x
n_seeds = 2
test = s02
"""


def write_cfg(tmp_path, text, name):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def read_all_bytes(directory):
    return {
        p.name: p.read_bytes() for p in sorted(Path(directory).iterdir()) if p.is_file()
    }


class TestGen:
    def test_writes_sources_and_manifest(self, tmp_path):
        cfg = write_cfg(tmp_path, GAUSS_CFG, "scen.cfg")
        out = tmp_path / "run"
        assert main(["gen", "--scenario", str(cfg), "--out", str(out)]) == 0
        names = {p.name for p in out.iterdir()}
        assert names == {"s00.csv", "s01.csv", "s02.csv", "manifest.json"}
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "gen"
        assert manifest["seed"] == 5
        assert manifest["version"]

    def test_sine_writes_test_source(self, tmp_path):
        cfg = write_cfg(tmp_path, SINE_CFG, "sine.cfg")
        out = tmp_path / "run"
        assert main(["gen", "--scenario", str(cfg), "--out", str(out), "--seed", "9"]) == 0
        names = {p.name for p in out.iterdir()}
        assert names == {"A.csv", "B.csv", "test.csv", "manifest.json"}


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self, tmp_path, capsys):
        assert main(["gen", "--nope", "x"]) == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_unknown_command_is_usage_error(self):
        assert main(["frobnicate"]) == 1

    def test_missing_scenario_file_is_data_error(self, tmp_path):
        out = tmp_path / "run"
        code = main(["gen", "--scenario", str(tmp_path / "absent.cfg"), "--out", str(out)])
        assert code == 2

    def test_unknown_reference_is_data_error(self, tmp_path):
        cfg = write_cfg(tmp_path, GAUSS_CFG, "scen.cfg")
        data = tmp_path / "data"
        main(["gen", "--scenario", str(cfg), "--out", str(data)])
        code = main(
            ["recommend", "--data", str(data), "--reference", "zzz", "--out", str(tmp_path / "o")]
        )
        assert code == 2


class TestDistance:
    def test_matrix_and_estimates(self, tmp_path):
        cfg = write_cfg(tmp_path, GAUSS_CFG, "scen.cfg")
        data = tmp_path / "data"
        main(["gen", "--scenario", str(cfg), "--out", str(data)])
        out = tmp_path / "dist"
        code = main(
            ["distance", "--data", str(data), "--metric", "score_xy", "--out", str(out), "--seed", "3"]
        )
        assert code == 0
        lines = (out / "matrix.csv").read_text().strip().splitlines()
        assert lines[0] == "p_source,s00,s01,s02"
        assert len(lines) == 4
        estimates = json.loads((out / "estimates.json").read_text())
        assert len(estimates) == 9
        assert all(e["kind"] == "score_xy" for e in estimates)
        assert all(0.01 <= e["value"] <= 0.99 for e in estimates)


class TestSimulate:
    def test_trajectory_table(self, tmp_path):
        scen = write_cfg(tmp_path, GAUSS_CFG, "scen.cfg")
        plan = write_cfg(tmp_path, PLAN_CFG, "plan.cfg")
        out = tmp_path / "sim"
        code = main(
            ["simulate", "--scenario", str(scen), "--plan", str(plan), "--out", str(out)]
        )
        assert code == 0
        lines = (out / "trajectory.csv").read_text().strip().splitlines()
        assert lines[0] == "x,series,mean,stderr"
        assert len(lines) == 1 + 3 * 2  # grid of 3 for divergence and auc series
        series = {line.split(",")[1] for line in lines[1:]}
        assert series == {"divergence:kl_ratio_x", "auc"}


class TestRecommend:
    def test_ranking_json(self, tmp_path):
        cfg = write_cfg(tmp_path, GAUSS_CFG, "scen.cfg")
        data = tmp_path / "data"
        main(["gen", "--scenario", str(cfg), "--out", str(data)])
        out = tmp_path / "rec"
        code = main(
            [
                "recommend",
                "--data", str(data),
                "--reference", "s00",
                "--metric", "score_xy",
                "--k", "1",
                "--train-size", "200",
                "--test-size", "100",
                "--out", str(out),
            ]
        )
        assert code == 0
        doc = json.loads((out / "ranking.json").read_text())
        assert doc["reference_id"] == "s00"
        assert {e["source_id"] for e in doc["entries"]} == {"s01", "s02"}
        values = [e["value"] for e in doc["entries"]]
        assert values == sorted(values)
        assert doc["recommended"] == [doc["entries"][0]["source_id"]]

    def test_full_strategy_outputs(self, tmp_path):
        cfg = write_cfg(tmp_path, GAUSS_CFG, "scen.cfg")
        data = tmp_path / "data"
        main(["gen", "--scenario", str(cfg), "--out", str(data)])
        out = tmp_path / "rec"
        code = main(
            [
                "recommend",
                "--data", str(data),
                "--reference", "s00",
                "--k", "1",
                "--train-size", "150",
                "--test-size", "100",
                "--full",
                "--out", str(out),
            ]
        )
        assert code == 0
        strategies = json.loads((out / "strategies.json").read_text())
        assert {s["strategy"] for s in strategies} == {
            "reference_only", "best_k", "worst_k", "mixture_baseline",
        }
        table = (out / "strategy_table.csv").read_text().strip().splitlines()
        assert table[0] == "x,series,mean,stderr"


class TestReport:
    def test_report_outputs(self, tmp_path):
        cfg = write_cfg(tmp_path, GAUSS_CFG, "scen.cfg")
        data = tmp_path / "data"
        main(["gen", "--scenario", str(cfg), "--out", str(data)])
        out = tmp_path / "rep"
        code = main(
            [
                "report",
                "--data", str(data),
                "--reference", "s00",
                "--add", "s01",
                "--train-size", "200",
                "--test-size", "100",
                "--folds", "3",
                "--repeats", "2",
                "--out", str(out),
            ]
        )
        assert code == 0
        result = json.loads((out / "result.json").read_text())
        assert set(result["mean"]) == {"auc", "accuracy", "worst_group_accuracy", "disparity"}
        assert len(result["records"]) == 3 * 2 * 4
        aggregates = (out / "aggregates.csv").read_text().strip().splitlines()
        assert aggregates[0] == "metric,mean,stderr"
        assert len(aggregates) == 5


class TestDeterminism:
    def run_pipeline(self, base, cfg_path):
        data = base / "data"
        rec = base / "rec"
        rep = base / "rep"
        assert main(["gen", "--scenario", str(cfg_path), "--out", str(data), "--seed", "42"]) == 0
        assert main(
            [
                "recommend",
                "--data", str(data),
                "--reference", "s00",
                "--k", "1",
                "--train-size", "150",
                "--test-size", "100",
                "--out", str(rec),
                "--seed", "42",
            ]
        ) == 0
        assert main(
            [
                "report",
                "--data", str(data),
                "--reference", "s00",
                "--add", "s01",
                "--train-size", "150",
                "--test-size", "100",
                "--folds", "3",
                "--repeats", "2",
                "--out", str(rep),
                "--seed", "42",
            ]
        ) == 0
        return {
            **{f"data/{k}": v for k, v in read_all_bytes(data).items()},
            **{f"rec/{k}": v for k, v in read_all_bytes(rec).items()},
            **{f"rep/{k}": v for k, v in read_all_bytes(rep).items()},
        }

    def test_pipeline_byte_identical(self, tmp_path):
        cfg = write_cfg(tmp_path, GAUSS_CFG, "scen.cfg")
        first = tmp_path / "one"
        second = tmp_path / "two"
        first.mkdir()
        second.mkdir()
        assert self.run_pipeline(first, cfg) == self.run_pipeline(second, cfg)

    def test_env_seed_overrides(self, tmp_path, monkeypatch):
        cfg = write_cfg(tmp_path, GAUSS_CFG, "scen.cfg")
        out = tmp_path / "envrun"
        monkeypatch.setenv("SOURCE_SELECT_SEED", "777")
        assert main(["gen", "--scenario", str(cfg), "--out", str(out), "--seed", "1"]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 777


class TestEmitPlotTables:
    def test_rejects_empty(self, tmp_path):
        with pytest.raises(EmptyResults):
            emit_plot_tables([], tmp_path / "t.csv")

    def test_stable_bytes(self, tmp_path):
        rows = [(1, "a", 0.5, 0.01), (2, "a", 0.25, 0.0)]
        emit_plot_tables(rows, tmp_path / "a.csv")
        emit_plot_tables(rows, tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert (tmp_path / "a.csv").read_text().splitlines()[0] == "x,series,mean,stderr"
