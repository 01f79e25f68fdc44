"""Tests for the command-line front end"""

import json

import pandas as pd
import pytest

from cli import build_parser, main


@pytest.fixture
def simulated(tmp_path):
    data_dir = tmp_path / "data"
    code = main(["--log-level", "WARNING", "simulate", "--p", "2", "--delta", "0.1", "--n", "40", "--M", "2",
                 "--seed", "3", "--out-dir", str(data_dir), "--prefix", "bss"])
    assert code == 0
    return data_dir


class TestParser:

    def test_requires_command(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_lambda_option(self):
        args = build_parser().parse_args(["simulate", "--lambda", "2.5"])
        assert args.lam == 2.5
        assert args.variant == "Y"


class TestCommands:

    def test_simulate_writes_one_file_per_path(self, simulated):
        files = sorted(p.name for p in simulated.glob("*.csv"))
        assert files == ["bss_00000.csv", "bss_00001.csv"]
        frame = pd.read_csv(simulated / "bss_00000.csv")
        assert frame.columns.tolist() == ["time", "C1", "C2"]
        assert len(frame) == 41

    def test_covariation_with_clt(self, simulated, tmp_path):
        out = tmp_path / "out"
        code = main(["covariation", str(simulated / "bss_00000.csv"), "--p", "2", "--delta", "0.1",
                     "--clt", "--out-dir", str(out)])
        assert code == 0
        cov = pd.read_csv(out / "bss_00000_covariation.csv")
        assert cov.columns.tolist() == ["time", "(1,1)", "(2,1)", "(2,2)"]
        assert (out / "bss_00000_clt.csv").exists()

    def test_feasible(self, simulated, tmp_path):
        out = tmp_path / "out"
        assert main(["feasible", str(simulated / "bss_00001.csv"), "--epsilon", "0.1", "--out-dir", str(out)]) == 0
        ratio = pd.read_csv(out / "bss_00001_correlation_ratio.csv")
        assert (ratio["(1,1)"] == 1.0).all()
        rel = pd.read_csv(out / "bss_00001_relative_covolatility.csv")
        assert rel.iloc[-1, 1:].tolist() == [1.0, 1.0, 1.0]

    def test_asymptotics(self, tmp_path):
        code = main(["asymptotics", "--kind", "gaussian", "--p", "1", "--n-sequence", "64", "--max-lag", "20",
                     "--out-dir", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "D_PairSquare.csv").exists()
        header = json.loads((tmp_path / "D_PairSquare.json").read_text())
        assert header["descriptor"]["scheme"] == "PairSquare"

    def test_audit(self, tmp_path):
        code = main(["audit", "--deltas", "0.1,0.6", "--lambdas", "1", "--n", "256", "--max-lag", "20",
                     "--out-dir", str(tmp_path)])
        assert code == 0
        df = pd.read_csv(tmp_path / "audit_results.csv")
        assert df.set_index("delta").loc[0.6, "verdict"] == "rejected"

    def test_experiment_run(self, tmp_path):
        config = tmp_path / "audit.json"
        config.write_text(json.dumps({
            "kind": "AssumptionAudit", "name": "cli_audit",
            "kernels": {"p": 1, "kernels": [[{"delta": 0.1, "lambda": 1.0}]]},
            "audit_deltas": [0.1, 0.6], "audit_lambdas": [1.0], "audit_n": 256, "audit_max_lag": 20,
            "audit_n_grid": [256, 512], "audit_kappas": [0.5],
        }))
        out = tmp_path / "reports"
        code = main(["experiment", "run", str(config), "--out-dir", str(out), "--format", "json", "--quiet"])
        assert code == 0
        assert json.loads((out / "cli_audit.json").read_text())["passed"] is True

    def test_model_errors_exit_with_two(self, tmp_path):
        code = main(["simulate", "--p", "1", "--sigma", "1,2,3", "--n", "10", "--out-dir", str(tmp_path)])
        assert code == 2

    def test_bad_config_exits_with_two(self, tmp_path):
        config = tmp_path / "bad.json"
        config.write_text(json.dumps({"kind": "Unknown", "kernels": {"p": 1, "kernels": [[None]]}}))
        assert main(["experiment", "run", str(config)]) == 2
