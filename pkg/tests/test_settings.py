"""Tests for experiment configuration"""

import json

import pytest

from config.settings import ExperimentConfig
from exceptions import ConfigError

KERNELS = {"p": 1, "kernels": [[{"delta": 0.25, "lambda": 1.0}]]}


class TestExperimentConfig:

    def test_defaults(self):
        cfg = ExperimentConfig.from_dict({"kind": "LLN", "kernels": KERNELS})
        assert cfg.regime == "CaseII-bar"
        assert cfg.variant == "Y"
        assert cfg.se_multiplier == 3.0
        assert cfg.formats == ["json", "table", "plot-data"]

    def test_round_trip(self):
        cfg = ExperimentConfig.from_dict({"kind": "CLT", "kernels": KERNELS, "n": 64, "M": 10, "seed": 3})
        assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="samples"):
            ExperimentConfig.from_dict({"kind": "LLN", "kernels": KERNELS, "samples": 10})

    def test_missing_required(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"kind": "LLN"})

    @pytest.mark.parametrize("override", [
        {"kind": "Bootstrap"},
        {"M": 0},
        {"se_multiplier": 0.5},
        {"n": 0},
        {"T": 0.0},
        {"threads": 0},
        {"variant": "Z"},
        {"checkpoints": [0.0, 1.0]},
        {"checkpoints": [1.5]},
        {"kernels": {"p": 1}},
        {"formats": ["json", "html"]},
    ])
    def test_invalid_values(self, override):
        data = {"kind": "LLN", "kernels": KERNELS}
        data.update(override)
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(data)

    def test_from_file(self, tmp_path):
        path = tmp_path / "lln.json"
        path.write_text(json.dumps({"kind": "LLN", "kernels": KERNELS, "name": "lln_p1"}))
        assert ExperimentConfig.from_file(path).name == "lln_p1"

    def test_unreadable_file(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(bad)
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(tmp_path / "missing.json")
