"""Experiment configuration loaded from JSON files"""

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from exceptions import ConfigError

from .constants import D_N_SEQUENCE, DEFAULT_SUBSTEPS, SE_MULTIPLIER
from .paths import DEFAULT_OUTPUT_DIR

EXPERIMENT_KINDS = ("LLN", "CLT", "FeasibleRatio", "AssumptionAudit", "GaussianCoreCLT")
REPORT_FORMATS = ("json", "table", "plot-data", "png")


@dataclass
class ExperimentConfig:
    """
    One Monte Carlo experiment

    kernels follows {"p": p, "kernels": [[{"delta": d, "lambda": l} | null, ...], ...]};
    volatility is a p x p grid of {"kind": ...} cells (null = zero), constant 1
    on the diagonal when omitted; drift holds one {"kind": ...} per component.
    """
    kind: str
    kernels: Dict[str, Any]
    name: str = "experiment"
    regime: str = "CaseII-bar"
    tau_mode: str = "SumDiagonal"
    variant: str = "Y"
    volatility: Optional[List[List[Optional[Dict[str, Any]]]]] = None
    drift: Optional[List[Dict[str, Any]]] = None
    T: float = 1.0
    n: int = 500
    M: int = 1000
    seed: int = 0
    threads: int = 1
    se_multiplier: float = SE_MULTIPLIER
    scheme: str = "auto"
    substeps: int = DEFAULT_SUBSTEPS
    warmup: float = 0.0
    checkpoints: List[float] = field(default_factory=lambda: [0.25, 0.5, 1.0])
    n_values: List[int] = field(default_factory=lambda: [250, 500, 1000])
    epsilon: Optional[float] = None
    d_n_sequence: List[int] = field(default_factory=lambda: list(D_N_SEQUENCE))
    d_max_lag: Optional[int] = None
    audit_deltas: List[float] = field(default_factory=lambda: [-0.25, 0.0, 0.1, 0.25, 0.4, 0.6])
    audit_lambdas: List[float] = field(default_factory=lambda: [0.5, 1.0, 2.0])
    audit_n: int = 1024
    audit_max_lag: int = 200
    audit_n_grid: List[int] = field(default_factory=lambda: [256, 1024, 4096])
    audit_kappas: List[float] = field(default_factory=lambda: [0.25, 0.5, 0.75])
    output_dir: str = DEFAULT_OUTPUT_DIR
    formats: List[str] = field(default_factory=lambda: ["json", "table", "plot-data"])

    def validate(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"Unknown experiment kind '{self.kind}', expected one of {EXPERIMENT_KINDS}")
        if self.M < 1:
            raise ConfigError(f"M must be at least 1, got {self.M}")
        if self.se_multiplier < 1.0:
            raise ConfigError(f"SE multiplier must be at least 1, got {self.se_multiplier}")
        if self.n < 1 or self.T <= 0.0:
            raise ConfigError(f"Grid needs n >= 1 and T > 0, got n={self.n}, T={self.T}")
        if self.threads < 1:
            raise ConfigError(f"threads must be at least 1, got {self.threads}")
        if self.variant not in ("Y", "X", "core"):
            raise ConfigError(f"variant must be Y, X or core, got '{self.variant}'")
        if any(not 0.0 < c <= 1.0 for c in self.checkpoints):
            raise ConfigError("checkpoints are fractions of T in (0, 1]")
        if "p" not in self.kernels or "kernels" not in self.kernels:
            raise ConfigError("kernels needs 'p' and 'kernels' entries")
        unknown = [f for f in self.formats if f not in REPORT_FORMATS]
        if unknown:
            raise ConfigError(f"Unknown report formats {unknown}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown config keys {unknown}")
        try:
            cfg = cls(**data)
        except TypeError as e:
            raise ConfigError(str(e)) from e
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ExperimentConfig":
        try:
            with open(path) as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Cannot read config {path}: {e}") from e
        return cls.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
