import json
import math
import subprocess
import sys

import numpy as np
import pytest

from ssf_lab.harness import (
    ConfigError,
    ExperimentConfig,
    fit_order,
    reference_potential,
    report_identity_bytes,
    run,
)
from ssf_lab.microhyperbolicity import escape_check_dilation
from ssf_lab.symbols import branches


class TestFitOrder:
    def test_pure_power(self):
        hs = [1 / 16, 1 / 32, 1 / 64, 1 / 128]
        fit = fit_order([(h, 3.0 * h**2) for h in hs])
        assert fit.slope == pytest.approx(2.0, abs=1e-12)
        assert fit.residual < 1e-12

    def test_mixed_power(self):
        hs = [1 / 16, 1 / 32, 1 / 64, 1 / 128]
        fit = fit_order([(h, h + 10.0 * h**2) for h in hs])
        assert 1.0 < fit.slope < 1.3

    def test_below_floor(self):
        fit = fit_order([(1 / 16, 0.0), (1 / 32, 1e-14), (1 / 64, 0.0)])
        assert fit.below_floor
        assert fit.verdict == "BELOW_FLOOR"

    def test_rejections(self):
        with pytest.raises(ConfigError):
            fit_order([(1 / 16, 1.0), (1 / 32, 0.5)])
        with pytest.raises(ConfigError):
            fit_order([(1 / 16, 1.0), (1 / 20, 0.5), (1 / 24, 0.3)])  # spread < 4
        with pytest.raises(ConfigError):
            fit_order([(1 / 16, 1.0), (1 / 32, -0.5), (1 / 128, 0.3)])

    def test_threshold_verdict(self):
        hs = [1 / 16, 1 / 32, 1 / 64, 1 / 128]
        fit = fit_order([(h, h) for h in hs], threshold=1.5)
        assert fit.verdict == "FAIL"
        fit2 = fit_order([(h, h**2) for h in hs], threshold=1.5)
        assert fit2.verdict == "PASS"


class TestReferencePotential:
    def test_vanishes_at_infinity(self):
        v = reference_potential()
        assert np.max(np.abs(v(12.0))) < 1e-50
        assert np.array_equal(v.v_infinity, np.zeros((2, 2)))

    def test_hermitian_at_random_points(self, rng):
        v = reference_potential()
        for _ in range(10):
            x = float(rng.uniform(-4, 4))
            m = v(x)
            assert np.max(np.abs(m - m.conj().T)) == 0.0

    def test_escape_certified_at_two(self):
        cert = escape_check_dilation(reference_potential(), 2.0)
        assert cert.valid
        assert cert.threshold_bound < 2.0

    def test_branch_values(self):
        v = reference_potential()
        e = branches(v, 0.0).values
        assert e[0] == pytest.approx(-1.1829032360881848, abs=1e-13)
        assert e[1] == pytest.approx(0.366842956673906, abs=1e-13)


class TestConfigValidation:
    BASE = {
        "schema_version": 1,
        "experiment": "coeffs",
        "potential": {"kind": "constant", "params": {"v_inf": 0.0, "N": 1}},
        "tau_grid": {"lo": 0.5, "hi": 1.5, "count": 3},
        "h_list": [0.25, 0.125],
    }

    def test_round_trip(self):
        cfg = ExperimentConfig.from_dict(self.BASE)
        assert cfg.experiment == "coeffs"
        assert cfg.seed == 0

    def test_version_mismatch(self):
        doc = dict(self.BASE, schema_version=2)
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(doc)

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(dict(self.BASE, experiment="frobnicate"))

    def test_increasing_h_list_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(dict(self.BASE, h_list=[0.125, 0.25]))

    def test_variant_required(self):
        doc = dict(self.BASE, experiment="ssf")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(doc)
        doc["variant"] = "weyl"
        ExperimentConfig.from_dict(doc)

    def test_sweep_needs_children(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"schema_version": 1, "experiment": "sweep"})


class TestRun:
    def test_coeffs_zero_potential(self, tmp_path):
        cfg = dict(TestConfigValidation.BASE, out=str(tmp_path / "o"))
        result = run(cfg)
        assert result.exit_code == 0
        rows = result.report["tables"]["main"]["rows"]
        assert all(r[1] == 0.0 and r[2] == 0.0 for r in rows)
        csv = (tmp_path / "o" / "data.csv").read_text().strip().split("\n")
        assert csv[0] == "tau,gamma0,a0"
        assert len(csv) == 4

    def test_check_mh_crossing(self, tmp_path):
        cfg = {
            "schema_version": 1,
            "experiment": "check-mh",
            "potential": {"kind": "conical_crossing", "params": {}},
            "tau0": 0.0,
            "check": {"box": [[-2, 2], [-2, 2]], "grid_points": 31},
            "out": str(tmp_path / "mh"),
        }
        result = run(cfg)
        assert result.report["verdicts"]["microhyperbolic"] == "FAIL"
        assert result.exit_code == 2
        cfg["tau0"] = 0.5
        cfg["out"] = str(tmp_path / "mh2")
        result2 = run(cfg)
        assert result2.report["verdicts"]["microhyperbolic"] == "PASS"
        assert result2.report["certificates"][0]["valid"] is True

    def test_check_escape(self, tmp_path):
        cfg = {
            "schema_version": 1,
            "experiment": "check-escape",
            "potential": {"kind": "reference", "params": {}},
            "tau0": 2.0,
            "check": {"grid_points": 801},
            "out": str(tmp_path / "esc"),
        }
        result = run(cfg)
        assert result.exit_code == 0
        assert result.report["verdicts"]["escape"] == "PASS"

    def test_determinism(self, tmp_path):
        cfg = {
            "schema_version": 1,
            "experiment": "coeffs",
            "potential": {"kind": "diagonal_bumps",
                          "params": {"depths": [-1.0], "centers": [0.0], "widths": [1.0]}},
            "tau_grid": {"lo": 0.6, "hi": 1.4, "count": 5},
            "seed": 7,
        }
        r1 = run(dict(cfg), str(tmp_path / "a"))
        r2 = run(dict(cfg), str(tmp_path / "b"))
        assert report_identity_bytes(r1.report) == report_identity_bytes(r2.report)
        csv1 = (tmp_path / "a" / "data.csv").read_bytes()
        csv2 = (tmp_path / "b" / "data.csv").read_bytes()
        assert csv1 == csv2

    def test_sweep(self, tmp_path):
        cfg = {
            "schema_version": 1,
            "experiment": "sweep",
            "experiments": [
                dict(TestConfigValidation.BASE),
                {
                    "schema_version": 1,
                    "experiment": "check-escape",
                    "potential": {"kind": "reference", "params": {}},
                    "tau0": 2.0,
                    "check": {"grid_points": 401},
                },
            ],
        }
        result = run(cfg, str(tmp_path / "sweep"))
        assert result.exit_code == 0
        assert len(result.report["verdicts"]) == 2

    def test_ssf_weak_small(self, tmp_path):
        cfg = {
            "schema_version": 1,
            "experiment": "ssf",
            "variant": "weak",
            "potential": {"kind": "diagonal_bumps",
                          "params": {"depths": [-1.0], "centers": [0.0], "widths": [1.0]}},
            "grid": {"R": 12.0, "tau_max": 2.0, "m_cap": 8192},
            "h_list": [1 / 8, 1 / 16, 1 / 32, 1 / 64],
            "test_function": {"kind": "bump", "support": [0.8, 1.2]},
            "tau0": 1.0,
            "thresholds": {"rel": 0.05, "order": 1.5},
            "out": str(tmp_path / "weak"),
        }
        result = run(cfg)
        assert result.report["verdicts"]["weak"] == "PASS"
        rows = result.report["tables"]["main"]["rows"]
        assert len(rows) == 4

    def test_trace_thm1_negative_control(self, tmp_path):
        # even window: the trace grows like 1/h, so the decay verdict fails
        cfg = {
            "schema_version": 1,
            "experiment": "trace",
            "variant": "thm1",
            "potential": {"kind": "constant", "params": {"v_inf": 0.0, "N": 1}},
            "grid": {"R": 6.0, "tau_max": 2.56},
            "h_list": [1 / 8, 1 / 16, 1 / 32, 1 / 64],
            "tau0": 1.0,
            "window": {"kind": "bump_at_zero", "eps": 0.25, "eps_rule": None},
            "test_function": {"kind": "bump", "support": [0.3, 1.7]},
            "cutoff": {"x": {"center": 0.0, "halfwidth": 2.0},
                       "xi": {"center": 0.0, "halfwidth": 2.0}},
            "check": {"box": [[-2.5, 2.5], [-2.0, 2.0]], "grid_points": 31},
            "out": str(tmp_path / "thm1neg"),
        }
        result = run(cfg)
        assert result.report["verdicts"]["thm1"] == "FAIL"
        assert result.exit_code == 2
        slope = result.report["tables"]["main"]["rows"][0][4]
        assert slope < 0.0

    def test_ssf_weyl_small(self, tmp_path):
        cfg = {
            "schema_version": 1,
            "experiment": "ssf",
            "variant": "weyl",
            "potential": {"kind": "diagonal_bumps",
                          "params": {"depths": [-1.0], "centers": [0.0], "widths": [1.0]}},
            "grid": {"R": 12.0, "tau_max": 2.56},
            "h_list": [1 / 8, 1 / 16, 1 / 32, 1 / 64],
            "tau0": 1.8,
            "tau_grid": {"lo": 1.7, "hi": 1.9, "count": 9},
            "window": {"kind": "bump_at_zero", "eps": 0.25},
            "test_function": {"kind": "bump", "support": [1.7, 1.9]},
            "thresholds": {"rel": 0.05, "order": 0.7},
            "out": str(tmp_path / "weyl"),
        }
        result = run(cfg)
        assert result.report["verdicts"]["weyl"] == "PASS"
        assert result.report["certificates"][0]["valid"] is True

    def test_trace_not_certified_gate(self, tmp_path):
        cfg = {
            "schema_version": 1,
            "experiment": "trace",
            "variant": "thm3",
            "potential": {"kind": "conical_crossing", "params": {}},
            "grid": {"R": 6.0, "tau_max": 2.0},
            "h_list": [1 / 8, 1 / 16, 1 / 32],
            "tau0": 0.0,
            "window": {"kind": "bump_at_zero", "eps": 0.25},
            "test_function": {"kind": "bump", "support": [-0.5, 0.5]},
            "cutoff": {"x": {"center": 0.0, "halfwidth": 2.0},
                       "xi": {"center": 0.0, "halfwidth": 2.0}},
            "check": {"box": [[-2.5, 2.5], [-2.0, 2.0]], "grid_points": 31},
            "out": str(tmp_path / "gated"),
        }
        result = run(cfg)
        assert result.report["verdicts"]["thm3"] == "NOT_CERTIFIED"
        assert result.exit_code == 0

    def test_h_term_supported(self, tmp_path):
        cfg = {
            "schema_version": 1,
            "experiment": "ssf",
            "variant": "weak",
            "potential": {"kind": "diagonal_bumps",
                          "params": {"depths": [-1.0], "centers": [0.0], "widths": [1.0]}},
            "h_term": {"kind": "diagonal_bumps",
                       "params": {"depths": [0.3], "centers": [0.5], "widths": [1.0]}},
            "grid": {"R": 12.0, "tau_max": 2.0},
            "h_list": [1 / 8, 1 / 16, 1 / 32, 1 / 64],
            "test_function": {"kind": "bump", "support": [0.8, 1.2]},
            "tau0": 1.0,
            "thresholds": {"rel": 0.5, "order": 0.8},
            "out": str(tmp_path / "hterm"),
        }
        result = run(cfg)
        assert "weak" in result.report["verdicts"]


class TestCli:
    def _run(self, *args):
        return subprocess.run([sys.executable, "-m", "ssf_lab.cli", *args],
                              capture_output=True, text=True)

    def test_missing_config(self, tmp_path):
        proc = self._run("coeffs", "--config", str(tmp_path / "nope.json"))
        assert proc.returncode == 1

    def test_bad_schema(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"schema_version": 99, "experiment": "coeffs"}))
        proc = self._run("coeffs", "--config", str(path))
        assert proc.returncode == 1
        assert "config error" in proc.stderr

    def test_subcommand_mismatch(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(TestConfigValidation.BASE))
        proc = self._run("ssf", "--config", str(path))
        assert proc.returncode == 1

    def test_coeffs_run(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(dict(TestConfigValidation.BASE)))
        proc = self._run("coeffs", "--config", str(path), "--out", str(tmp_path / "out"))
        assert proc.returncode == 0
        assert "coeffs: COMPLETE" in proc.stdout
        assert (tmp_path / "out" / "report.json").exists()

    def test_fail_exit_code(self, tmp_path):
        cfg = {
            "schema_version": 1,
            "experiment": "check-mh",
            "potential": {"kind": "conical_crossing", "params": {}},
            "tau0": 0.0,
            "check": {"box": [[-2, 2], [-2, 2]], "grid_points": 21},
        }
        path = tmp_path / "mh.json"
        path.write_text(json.dumps(cfg))
        proc = self._run("check-mh", "--config", str(path), "--out", str(tmp_path / "o"))
        assert proc.returncode == 2
