"""Tests for the experiment harness"""

import json
from pathlib import Path

import pytest

from config.settings import ExperimentConfig
from exceptions import ConfigError
import harness
from harness import ExperimentRunner, provenance

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

P1 = {"p": 1, "kernels": [[{"delta": 0.25, "lambda": 1.0}]]}
P2_DIAGONAL = {"p": 2, "kernels": [[{"delta": 0.25, "lambda": 1.0}, None], [None, {"delta": 0.1, "lambda": 2.0}]]}


@pytest.fixture
def runner(tmp_path):
    return ExperimentRunner(output_dir=str(tmp_path), progress=False)


def _audit_config(**overrides):
    data = {"kind": "AssumptionAudit", "kernels": P1, "name": "audit_small",
            "audit_deltas": [-0.25, 0.6], "audit_lambdas": [1.0], "audit_n": 256,
            "audit_max_lag": 20, "audit_n_grid": [256, 512], "audit_kappas": [0.5]}
    data.update(overrides)
    return ExperimentConfig.from_dict(data)


class TestAuditKernel:

    def test_out_of_range_delta_is_rejected(self, runner):
        for delta in (-0.5, 0.5, 0.6):
            result = runner.audit_kernel(delta, 1.0, 256, 20, [256, 512], [0.5])
            assert result["verdict"] == "rejected"

    def test_in_range_delta_is_audited(self, runner):
        result = runner.audit_kernel(-0.25, 1.0, 256, 20, [256, 512], [0.5])
        assert result["verdict"] in ("pass", "warn")
        assert result["squared_correlations"] in ("pass", "warn")
        assert len(result["pi_fitted_lambda"]) == 1
        assert result["max_gap_to_limit"] >= 0.0

    def test_smooth_delta_warns_but_is_not_rejected(self, runner):
        result = runner.audit_kernel(0.25, 1.0, 256, 20, [256, 1024, 4096], [0.5])
        assert result["pi_decay"] == "warn"
        assert result["verdict"] == "warn"

    def test_audit_experiment_passes(self, runner):
        report = runner.run(_audit_config())
        assert report["passed"]
        assert len(report["checks"]) == 2
        assert report["records"] == []


class TestReports:

    def test_json_is_deterministic(self, runner, tmp_path):
        cfg = _audit_config()
        first = runner.emit_report(runner.run(cfg), ["json"], name="first")
        second = runner.emit_report(runner.run(cfg), ["json"], name="second")
        assert first[0].read_bytes() == second[0].read_bytes()
        assert "wall_time" not in json.loads(first[0].read_text())
        assert "wall_time" in json.loads((tmp_path / "first.timing.json").read_text())

    def test_all_formats(self, runner, tmp_path):
        cfg = ExperimentConfig.from_dict({"kind": "GaussianCoreCLT", "kernels": P1, "name": "core_small",
                                          "variant": "core", "regime": "CaseI", "n": 64, "M": 40,
                                          "d_n_sequence": [64], "seed": 1})
        written = runner.emit_report(runner.run(cfg), ["json", "table", "plot-data", "png"])
        names = sorted(p.name for p in written)
        assert names == ["core_small.json", "core_small.timing.json", "core_small.txt",
                         "core_small_plot.csv", "core_small_zscores.png"]
        header = (tmp_path / "core_small_plot.csv").read_text().splitlines()[0]
        assert header == "statistic,t,value,target,se,band_lower,band_upper"
        assert "OVERALL:" in (tmp_path / "core_small.txt").read_text()

    def test_provenance_tag(self):
        tag = provenance("CLT", "formula")
        assert tag.startswith("CLT | ")
        assert len(tag.split(" | ")[1]) == 12
        assert provenance("CLT", "formula") == tag


class TestSmallRuns:

    def test_lln_report(self, runner):
        cfg = ExperimentConfig.from_dict({"kind": "LLN", "kernels": P1, "n_values": [40, 320], "M": 40,
                                          "checkpoints": [0.5, 1.0], "seed": 2})
        report = runner.run(cfg)
        assert len(report["records"]) == 2 * 2
        error_checks = [c for c in report["checks"] if c["check"].startswith("lln_error_decreasing")]
        assert len(error_checks) == 2
        for check in error_checks:
            assert check["detail"]["rms_shrinking"], check["detail"]["rms"]
            assert check["passed"]
            # one component with unit volatility: finite-n and limit centering coincide
            assert max(check["detail"]["centering_gap"]) <= 1e-12

    def test_lln_check_fails_when_error_grows(self, runner, monkeypatch):
        # rescaling the statistic by n makes the error grow along n_values
        original = harness.realised_covariation

        def inflated(bundle, scaling):
            cov = original(bundle, scaling)
            cov.values[:] = cov.values * bundle.grid.n
            return cov

        monkeypatch.setattr(harness, "realised_covariation", inflated)
        cfg = ExperimentConfig.from_dict({"kind": "LLN", "kernels": P1, "n_values": [40, 320], "M": 10,
                                          "checkpoints": [1.0], "seed": 2})
        report = runner.run(cfg)
        check = next(c for c in report["checks"] if c["check"].startswith("lln_error_decreasing"))
        assert not check["passed"]
        assert not report["passed"]

    def test_lln_rejects_empirical_scaling(self, runner):
        cfg = ExperimentConfig.from_dict({"kind": "LLN", "kernels": P1, "regime": "CaseII-tilde-empirical",
                                          "n_values": [40], "M": 2})
        with pytest.raises(ConfigError):
            runner.run(cfg)

    def test_clt_report_structure(self, runner):
        cfg = ExperimentConfig.from_dict({"kind": "CLT", "kernels": P2_DIAGONAL, "variant": "X",
                                          "regime": "CaseII-tilde-theoretical", "n": 40, "M": 30,
                                          "d_n_sequence": [40], "seed": 4})
        report = runner.run(cfg)
        assert len(report["records"]) == 6
        names = [c["check"] for c in report["checks"]]
        assert names == ["clt_mean_zero", "clt_normality", "limit_independent_of_core", "d_diagnostics"]
        assert all(r["provenance"].startswith("CLT | ") for r in report["records"])

    def test_gaussian_core_needs_core_variant(self, runner):
        cfg = ExperimentConfig.from_dict({"kind": "GaussianCoreCLT", "kernels": P1, "variant": "Y"})
        with pytest.raises(ConfigError):
            runner.run(cfg)

    def test_feasible_checks(self, runner):
        cfg = ExperimentConfig.from_dict({"kind": "FeasibleRatio", "kernels": P2_DIAGONAL, "n": 40, "M": 30,
                                          "d_n_sequence": [40], "seed": 6})
        report = runner.run(cfg)
        checks = {c["check"]: c["passed"] for c in report["checks"]}
        assert checks["correlation_ratio_bounded"]
        assert checks["relative_covolatility_terminal_one"]
        assert checks["rescaling_invariance"]
        statistics = [r["statistic"] for r in report["records"]]
        assert "correlation_ratio(2,1)" in statistics
        assert "correlation_ratio(1,1)" not in statistics

    def test_volatility_grid_validation(self, runner):
        cfg = ExperimentConfig.from_dict({"kind": "LLN", "kernels": P1, "volatility": [[None]]})
        with pytest.raises(ConfigError):
            runner.build_volatility(cfg, 1)
        cfg = ExperimentConfig.from_dict({"kind": "LLN", "kernels": P1, "drift": [{"kind": "zero"}] * 2})
        with pytest.raises(ConfigError):
            runner.build_drift(cfg, 1)


@pytest.mark.slow
@pytest.mark.parametrize("config", sorted(p.name for p in CONFIG_DIR.glob("*.json")))
def test_acceptance_config(tmp_path, config):
    cfg = ExperimentConfig.from_file(CONFIG_DIR / config)
    report = ExperimentRunner(output_dir=str(tmp_path), progress=False).run(cfg)
    failed = [r["statistic"] for r in report["records"] if not r["passed"]]
    failed += [c["check"] for c in report["checks"] if not c["passed"]]
    assert report["passed"], failed
