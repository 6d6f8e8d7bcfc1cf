import csv
import json

import pytest

from jadce import bench
from jadce.errors import ConfigError

SWEEP_CONFIG = """\
[instance]
devices = 20, 30
antennas = 3
seq_length = 6
active = 2
noise_var = 0.01

[solve]
solvers = aladin, admm, fista, proxgrad
gamma_scale = 0.5
rho_scale = 0.8
tol = 1e-5
max_iter = 40000
deterministic = true

[bench]
seeds = 0:3
repetitions = 1
jobs = 1
"""


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def sweep_dir(tmp_path_factory):
    import time

    root = tmp_path_factory.mktemp("sweep")
    cfg_path = root / "bench.ini"
    cfg_path.write_text(SWEEP_CONFIG)
    cfg = bench.read_config(cfg_path)
    out = root / "out"
    t0 = time.perf_counter()
    bench.run_bench(cfg, output_dir=out)
    assert time.perf_counter() - t0 < 60  # desk-scale smoke budget
    return out


class TestConfigParsing:
    def test_full_round(self, tmp_path):
        path = tmp_path / "b.ini"
        path.write_text(SWEEP_CONFIG)
        cfg = bench.read_config(path)
        assert cfg.devices == [20, 30]
        assert cfg.seeds == [0, 1, 2]
        assert cfg.solvers == ["aladin", "admm", "fista", "proxgrad"]
        assert cfg.deterministic is True

    def test_missing_instance_section(self, tmp_path):
        path = tmp_path / "b.ini"
        path.write_text("[solve]\nsolvers = aladin\n")
        with pytest.raises(ConfigError):
            bench.read_config(path)

    def test_unknown_solver(self, tmp_path):
        path = tmp_path / "b.ini"
        path.write_text(SWEEP_CONFIG.replace("proxgrad", "newton"))
        with pytest.raises(ConfigError):
            bench.read_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            bench.read_config(tmp_path / "nope.ini")


class TestSweepOutputs:
    def test_all_artifacts_written(self, sweep_dir):
        for name in ("runs.csv", "fig2.csv", "table1.csv", "report.json"):
            assert (sweep_dir / name).exists(), name
        for solver in ("aladin", "admm", "fista", "proxgrad"):
            assert (sweep_dir / f"fig1_{solver}.csv").exists()

    def test_runs_rows_complete_and_traceable(self, sweep_dir):
        rows = read_rows(sweep_dir / "runs.csv")
        assert len(rows) == 2 * 3 * 4  # devices x seeds x solvers
        for row in rows:
            assert row["status"] == "converged"
            assert row["config_hash"]
            assert row["version"]
            assert int(row["iterations"]) >= 1

    def test_fig2_has_per_devices_medians(self, sweep_dir):
        rows = read_rows(sweep_dir / "fig2.csv")
        assert {r["devices"] for r in rows} == {"20", "30"}
        assert {r["solver"] for r in rows} == {"aladin", "admm", "fista", "proxgrad"}
        for r in rows:
            assert float(r["median_iterations"]) >= 1

    def test_table1_percentages_sum_to_100(self, sweep_dir):
        rows = read_rows(sweep_dir / "table1.csv")
        assert len(rows) == 4
        for r in rows:
            total = float(r["parallel_pct"]) + float(r["consensus_pct"])
            assert total == pytest.approx(100.0, abs=0.1)

    def test_fig1_columns(self, sweep_dir):
        rows = read_rows(sweep_dir / "fig1_aladin.csv")
        assert rows and set(rows[0]) == {"iter", "objective_gap", "max_step"}
        gaps = [float(r["objective_gap"]) for r in rows]
        assert all(g >= 0 for g in gaps)
        assert gaps[-1] <= gaps[0] + 1e-12

    def test_report_json_aggregates(self, sweep_dir):
        doc = json.loads((sweep_dir / "report.json").read_text())
        assert doc["cells_failed"] == 0
        assert set(doc["by_solver"]) == {"aladin", "admm", "fista", "proxgrad"}

    def test_aladin_beats_admm_iterations(self, sweep_dir):
        rows = read_rows(sweep_dir / "fig2.csv")
        med = {(r["devices"], r["solver"]): float(r["median_iterations"]) for r in rows}
        for devices in ("20", "30"):
            assert med[(devices, "aladin")] < med[(devices, "admm")]


class TestReproducibilityAndFailures:
    def test_identical_outputs_excluding_timings(self, tmp_path):
        cfg_path = tmp_path / "b.ini"
        cfg_path.write_text(SWEEP_CONFIG)
        stripped = []
        for run in ("one", "two"):
            out = tmp_path / run
            bench.run_bench(bench.read_config(cfg_path), output_dir=out)
            rows = read_rows(out / "runs.csv")
            timing_cols = {"wall_s", "parallel_ms_per_iter", "consensus_ms_per_iter"}
            stripped.append(
                [tuple(v for k, v in sorted(r.items()) if k not in timing_cols) for r in rows]
            )
            if run == "one":
                fig2_first = (out / "fig2.csv").read_bytes()
            else:
                assert (out / "fig2.csv").read_bytes() == fig2_first
        assert stripped[0] == stripped[1]

    def test_partial_failures_recorded_and_run_continues(self, tmp_path):
        cfg_path = tmp_path / "b.ini"
        cfg_path.write_text(SWEEP_CONFIG.replace("devices = 20, 30", "devices = 1, 30"))
        out = tmp_path / "out"
        rows = bench.run_bench(bench.read_config(cfg_path), output_dir=out)
        failed = [r for r in rows if r["status"] == "error"]
        ok = [r for r in rows if r["status"] != "error"]
        assert failed and ok
        assert all("n_active" in r["error"] or "ConfigError" in r["error"] for r in failed)
        doc = json.loads((out / "report.json").read_text())
        assert doc["cells_failed"] == len(failed)

    def test_worker_pool_matches_serial(self, tmp_path):
        cfg_path = tmp_path / "b.ini"
        small = SWEEP_CONFIG.replace("seeds = 0:3", "seeds = 0:2").replace(
            "solvers = aladin, admm, fista, proxgrad", "solvers = aladin, admm"
        )
        cfg_path.write_text(small)
        outputs = []
        for jobs, name in ((1, "serial"), (2, "pool")):
            cfg = bench.read_config(cfg_path)
            cfg.jobs = jobs
            out = tmp_path / name
            bench.run_bench(cfg, output_dir=out)
            rows = read_rows(out / "runs.csv")
            outputs.append([
                (r["solver"], r["seed"], r["iterations"], r["final_objective"]) for r in rows
            ])
        assert outputs[0] == outputs[1]
