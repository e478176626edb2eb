import csv
from pathlib import Path

import numpy as np
import pytest

from ibmg.bench import (
    DEFAULT_CONFIG,
    RESIDUAL_COLUMNS,
    SUMMARY_COLUMNS,
    build_meshes,
    format_config,
    parse_config,
    read_snapshot,
    run_experiment,
    run_point,
    snapshot_fields,
    sweep_points,
)
from ibmg.cli import main


SMALL_CFG = """
problem = thin
N = 16, 32
gamma = 5
mu = 1
rho = 0
smoother = sc
box = 8
overlap = 2
tol = 1e-12
max_iters = 100
record_walltime = false
"""


class TestConfig:
    def test_defaults_round_trip(self):
        cfg = parse_config(format_config())
        assert cfg == DEFAULT_CONFIG

    def test_parse_lists_and_comments(self):
        cfg = parse_config("N = 64, 128  # sweep\ngamma = 5, 50\n")
        assert cfg["N"] == [64, 128]
        assert cfg["gamma"] == [5.0, 50.0]

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown config key"):
            parse_config("nonsense = 1\n")

    def test_bad_line_rejected(self):
        with pytest.raises(ValueError, match="expected key = value"):
            parse_config("just some words\n")

    def test_sweep_cardinality(self):
        cfg = parse_config("N = 64, 128\ngamma = 5\nsmoother = sc\n")
        assert len(sweep_points(cfg)) == 2
        cfg = parse_config("N = 64, 128\ngamma = 5, 50\nsmoother = ras, sc\n")
        assert len(sweep_points(cfg)) == 8

    def test_build_meshes_dispatch(self):
        assert len(build_meshes("thin", 16, 1.0, 0)) == 1
        assert len(build_meshes("suspension", 64, 1.0, 7)) == 16
        with pytest.raises(ValueError):
            build_meshes("other", 16, 1.0, 0)


class TestRunExperiment:
    def test_two_rows_and_schema(self, tmp_path):
        out = tmp_path / "res"
        assert run_experiment(parse_config(SMALL_CFG), out_dir=out) == 0
        with open(out / "summary.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == SUMMARY_COLUMNS
        assert len(rows) == 3  # header + 2 sweep points
        assert rows[1][0] == "thin" and rows[1][1] == "16"
        assert rows[2][1] == "32"
        assert rows[1][12] in ("true", "false")
        with open(out / "residuals.csv") as fh:
            rrows = list(csv.reader(fh))
        assert rrows[0] == RESIDUAL_COLUMNS
        assert rrows[1][0] == "thin-N16-g5-mu1-rho0-sc-b8-o2"
        assert float(rrows[1][2]) == 1.0  # initial relative residual

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = parse_config(SMALL_CFG.replace("16, 32", "16"))
        a, b = tmp_path / "a", tmp_path / "b"
        run_experiment(cfg, out_dir=a)
        run_experiment(cfg, out_dir=b)
        assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()
        assert (a / "residuals.csv").read_bytes() == (b / "residuals.csv").read_bytes()

    def test_nonconvergent_run_recorded_not_raised(self, tmp_path):
        cfg = parse_config(SMALL_CFG.replace("16, 32", "16"))
        cfg["max_iters"] = 2
        out = tmp_path / "nc"
        assert run_experiment(cfg, out_dir=out) == 0
        with open(out / "summary.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[1][12] == "false"


class TestSnapshot:
    def test_round_trip_bitwise(self, tmp_path):
        cfg = parse_config(SMALL_CFG.replace("16, 32", "16"))
        point = sweep_points(cfg)[0]
        result, problem = run_point(point, cfg)
        path = tmp_path / "fields.csv"
        snapshot_fields(result, problem, path)
        with open(path) as fh:
            header = fh.readline().strip()
        assert header == "field,i,j,x,y,value"
        arrays = read_snapshot(path)
        assert np.array_equal(arrays["u1"], result.u.u1)
        assert np.array_equal(arrays["u2"], result.u.u2)
        assert np.array_equal(arrays["p"], result.p)
        assert np.array_equal(arrays["node_x"], result.positions[:, 0])
        assert np.array_equal(arrays["node_y"], result.positions[:, 1])


class TestCLI:
    def test_print_config(self, capsys):
        assert main(["print-config"]) == 0
        out = capsys.readouterr().out
        assert "problem = thick" in out
        assert "smoother = sc" in out

    def test_run_and_snapshot(self, tmp_path, capsys):
        cfg_file = tmp_path / "cfg.txt"
        cfg_file.write_text(SMALL_CFG.replace("16, 32", "16"))
        out = tmp_path / "out"
        assert main(["run", str(cfg_file), "--out-dir", str(out)]) == 0
        assert (out / "summary.csv").exists()
        snap = tmp_path / "snap.csv"
        assert main(["snapshot", str(cfg_file), "-o", str(snap)]) == 0
        assert snap.exists()

    def test_invalid_config_is_usage_error(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("bogus_key = 3\n")
        with pytest.raises(SystemExit) as exc:
            main(["run", str(bad)])
        assert exc.value.code == 2

    def test_missing_file_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["run", str(tmp_path / "none.txt")])
        assert exc.value.code == 2
