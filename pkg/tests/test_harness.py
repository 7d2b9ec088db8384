"""Experiment harness: run functions, manifests, suite, and the CLI."""
import json

import numpy as np
import pytest

from rough_scl.cli import main
from rough_scl.config import load_config
from rough_scl.harness import (
    DEFAULT_SUITE,
    EXPERIMENTS,
    execute,
    output_root,
    rerun_from_manifest,
    run_contraction,
    run_path_stability,
    run_refinement,
    run_suite,
    suite_cfg,
)


def tiny(**over):
    base = {
        "n_cells": 100,
        "horizon": 0.5,
        "n_outputs": 4,
        "path": "brownian:4",
        "u_lo": -1.5,
        "u_hi": 1.5,
    }
    base.update(over)
    return load_config(None, base)


class TestRunSolve:
    def test_invariants_and_files(self, tmp_path):
        run_dir, report = execute("solve", tiny(experiment="solve"), tmp_path)
        assert report["pass"]
        assert report["mass_drift"] <= 1e-12
        assert report["tv_increase"] <= 1e-10
        assert report["max_principle_violation"] <= 1e-12
        names = {p.name for p in run_dir.iterdir()}
        assert {"manifest.json", "report.json", "config.txt", "path.csv", "invariants.csv"} <= names
        assert sum(n.startswith("state_") for n in names) == 5  # n_outputs + 1

    def test_outflow_skips_mass_gate(self, tmp_path):
        cfg = tiny(experiment="solve", bc="outflow")
        _, report = execute("solve", cfg, tmp_path)
        assert report["mass_drift"] is None
        assert report["pass"]


class TestContraction:
    def test_identical_data_zero_distance(self, tmp_path):
        cfg = tiny(experiment="contraction", datum2="riemann:1,0")
        run_dir = tmp_path / "c"
        run_dir.mkdir()
        report = run_contraction(cfg, run_dir)
        assert report["pass"]
        assert np.allclose(report["distances"], 0.0)

    def test_distinct_data_nonincreasing(self, tmp_path):
        cfg = tiny(experiment="contraction", datum2="riemann:0.8,-0.2")
        run_dir = tmp_path / "c"
        run_dir.mkdir()
        report = run_contraction(cfg, run_dir)
        assert report["pass"]
        d = report["distances"]
        assert d[0] > 0.0
        assert all(b <= a + 1e-10 for a, b in zip(d, d[1:]))

    def test_translated_data_frozen_path_keep_distance(self, tmp_path):
        """With a frozen driver nothing moves, so the L1 distance of any two
        data is exactly constant in time."""
        csv = tmp_path / "w.csv"
        csv.write_text("t,w1\n0.0,0.0\n0.5,0.0\n")
        cfg = tiny(
            experiment="contraction",
            path=f"file:{csv}",
            datum="bump:-0.2,0.3,0.5",
            datum2="bump:0.2,0.3,0.5",
        )
        run_dir = tmp_path / "c"
        run_dir.mkdir()
        report = run_contraction(cfg, run_dir)
        d = np.asarray(report["distances"])
        assert np.allclose(d, d[0], atol=1e-14)
        assert d[0] > 0.1

    def test_needs_datum2(self, tmp_path):
        with pytest.raises(ValueError, match="datum2"):
            run_contraction(tiny(experiment="contraction"), tmp_path)


class TestPathStability:
    def test_report_shape_and_gates(self, tmp_path):
        cfg = tiny(
            experiment="path-stability",
            datum="riemann:2,0",
            u_lo=-0.5,
            u_hi=2.5,
            n_cells=200,
            epsilons="0.4,0.2,0.1,0.05",
        )
        run_dir = tmp_path / "s"
        run_dir.mkdir()
        report = run_path_stability(cfg, run_dir)
        assert (run_dir / "stability.csv").exists()
        assert len(report["errors"]) == 4
        assert report["errors"] == sorted(report["errors"], reverse=True)
        assert report["monotone"]
        assert 0.3 <= report["slope"] <= 1.2

    def test_rejects_narrow_epsilon_span(self, tmp_path):
        cfg = tiny(experiment="path-stability", epsilons="0.2,0.1")
        with pytest.raises(ValueError, match="octaves"):
            run_path_stability(cfg, tmp_path)


class TestRefinement:
    def test_gap_table(self, tmp_path):
        cfg = tiny(experiment="refine", level_lo=2, level_hi=5, n_cells=80)
        run_dir = tmp_path / "r"
        run_dir.mkdir()
        report = run_refinement(cfg, run_dir)
        assert (run_dir / "refinement.csv").exists()
        assert len(report["gaps"]) == 3
        assert all(g > 0 for g in report["gaps"])
        assert len(report["path_gaps"]) == 3

    def test_needs_three_levels(self, tmp_path):
        cfg = tiny(experiment="refine", level_lo=4, level_hi=6)
        with pytest.raises(ValueError, match="three levels"):
            run_refinement(cfg, tmp_path)


class TestKineticAndDissipative:
    def test_kinetic_check_small(self, tmp_path):
        cfg = tiny(experiment="kinetic-check", n_xi=80)
        run_dir, report = execute("kinetic-check", cfg, tmp_path)
        assert report["pass"]
        assert report["min_m"] >= -report["tol_m"]
        assert report["unpr1_max_relative"] >= 0.0
        assert (run_dir / "xi_mass.csv").exists()
        assert (run_dir / "l1_identity.csv").exists()

    def test_dissipative_check_small(self, tmp_path):
        cfg = tiny(
            experiment="dissipative-check",
            n_seeds=1,
            n_data=1,
            n_anchors=1,
            datum="riemann:0.5,0",
            x_lo=-2.0,
            x_hi=2.0,
        )
        run_dir, report = execute("dissipative-check", cfg, tmp_path)
        assert report["pass"]
        assert report["n_windows"] == 1
        assert report["min_h"] > 0.0
        assert (run_dir / "windows.csv").exists()


class TestSemilinearDemo:
    def test_zero_source_gap_small(self, tmp_path):
        cfg = tiny(experiment="semilinear-demo", source="zero", n_cells=200, horizon=0.5)
        run_dir, report = execute("semilinear-demo", cfg, tmp_path)
        assert report["pass"]
        assert abs(report["gap"]) <= 2.0 * report["dx"] + 1e-6
        assert (run_dir / "mismatch.csv").exists()

    def test_unknown_source(self, tmp_path):
        cfg = tiny(experiment="semilinear-demo", source="tanh")
        with pytest.raises(ValueError, match="source spec"):
            execute("semilinear-demo", cfg, tmp_path)


class TestManifests:
    def test_execute_writes_manifest(self, tmp_path):
        run_dir, _ = execute("solve", tiny(experiment="solve", seed=5), tmp_path)
        m = json.loads((run_dir / "manifest.json").read_text())
        assert m["experiment"] == "solve"
        assert m["seed"] == 5
        assert m["run_id"] == run_dir.name
        assert "invariants.csv" in m["outputs"]
        assert m["config"]["n_cells"] == 100

    def test_unknown_experiment(self, tmp_path):
        with pytest.raises(ValueError, match="unknown experiment"):
            execute("renormalize", tiny(), tmp_path)

    def test_rerun_is_byte_identical(self, tmp_path):
        run_dir, _ = execute("solve", tiny(experiment="solve", seed=11), tmp_path)
        result = rerun_from_manifest(run_dir / "manifest.json", tmp_path)
        assert result["all_match"]
        assert set(result["match"]) == set(
            json.loads((run_dir / "manifest.json").read_text())["outputs"]
        )

    def test_unique_run_dirs(self, tmp_path):
        d1, _ = execute("solve", tiny(experiment="solve"), tmp_path)
        d2, _ = execute("solve", tiny(experiment="solve"), tmp_path)
        assert d1 != d2


class TestOutputRoot:
    def test_env_var_honored(self, tmp_path, monkeypatch):
        monkeypatch.setenv("ROUGH_SCL_OUT", str(tmp_path / "elsewhere"))
        assert output_root() == tmp_path / "elsewhere"

    def test_default_is_runs(self, monkeypatch):
        monkeypatch.delenv("ROUGH_SCL_OUT", raising=False)
        assert output_root().name == "runs"


class TestSuite:
    def test_empty_suite_passes(self, tmp_path):
        suite_dir, summary = run_suite([], tiny(), tmp_path)
        assert summary["pass"]
        assert (suite_dir / "report.json").exists()

    def test_suite_cfg_fills_required_inputs(self):
        cfg = tiny(bc="periodic")
        assert suite_cfg(cfg, "contraction")["datum2"] == "riemann:0.8,0"
        assert suite_cfg(cfg, "semilinear-demo")["bc"] == "outflow"
        assert suite_cfg(cfg, "solve")["experiment"] == "solve"

    def test_suite_runs_members_concurrently(self, tmp_path):
        cfg = tiny(source="zero")
        suite_dir, summary = run_suite(["solve", "contraction"], cfg, tmp_path, workers=2)
        assert set(summary["experiments"]) == {"solve", "contraction"}
        assert summary["pass"]
        subdirs = [p for p in suite_dir.iterdir() if p.is_dir()]
        assert len(subdirs) == 2

    def test_default_suite_names_known(self):
        assert set(DEFAULT_SUITE) <= set(EXPERIMENTS)


class TestCli:
    def test_solve_round_trip(self, tmp_path, capsys):
        code = main(["solve", "--out", str(tmp_path), "--seed", "1",
                     "--config", self._cfg(tmp_path)])
        out = capsys.readouterr().out
        assert code == 0
        assert "solve: PASS" in out
        assert "tv_increase" in out

    def test_suite_lines(self, tmp_path, capsys):
        code = main(["suite", "solve", "--out", str(tmp_path),
                     "--config", self._cfg(tmp_path)])
        out = capsys.readouterr().out
        assert code == 0
        assert "solve: PASS" in out
        assert "suite: PASS" in out

    def test_unknown_suite_member(self, tmp_path, capsys):
        code = main(["suite", "warp", "--out", str(tmp_path)])
        assert code == 2
        assert "unknown experiments" in capsys.readouterr().err

    def test_malformed_config_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.txt"
        bad.write_text("n_cols = 7\n")
        code = main(["solve", "--out", str(tmp_path), "--config", str(bad)])
        assert code == 2
        assert "config error" in capsys.readouterr().err

    @staticmethod
    def _cfg(tmp_path) -> str:
        f = tmp_path / "tiny.txt"
        if not f.exists():
            f.write_text(
                "n_cells = 100\nhorizon = 0.5\nn_outputs = 4\npath = brownian:4\n"
                "u_lo = -1.5\nu_hi = 1.5\n"
            )
        return str(f)
