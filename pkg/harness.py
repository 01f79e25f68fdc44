"""
Harness Module - Monte Carlo experiment orchestration
Simulates paths for an experiment config, compares empirical statistics with their
theoretical targets and emits deterministic reports
"""

import hashlib
import json
import logging
import platform
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, TypedDict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import scipy
from tqdm import tqdm

from asymptotics import D_case1_bss, D_gaussian, D_scenario2, DMatrix, ratio_limit_covariance, statistic_covariance
from config.constants import DELTA_LOWER, DELTA_UPPER, NORMALITY_LEVEL
from config.paths import DEFAULT_OUTPUT_DIR
from config.settings import ExperimentConfig
from covariation import bias_term, clt_statistic, correlation_ratio, realised_covariation, relative_covolatility, vech_pairs
from exceptions import BSSError, ConfigError, InvalidModel
from kernel import (
    GammaKernel,
    KernelSpec,
    check_assumption_pi_decay,
    check_assumption_squared_correlations,
    core_family,
    correlation_table,
    limiting_correlations,
)
from scaling import Regime, ScalingFactors, tau_for_regime
from simulate import (
    GridSpec,
    PathBundle,
    build_core_covariance,
    constant_volatility,
    drift_from_dict,
    simulate_bss,
    simulate_gaussian_core,
    volatility_from_dict,
    volatility_moments,
)
from utils.stats import covariance_and_se, jarque_bera_pvalues, mean_and_se, z_score

logger = logging.getLogger(__name__)

BIAS_SCENARIO = {
    Regime.CASE_I: "CaseI",
    Regime.PARTITION: "CaseI",
    Regime.CASE_II_BAR: "CaseII-bar",
    Regime.CASE_II_TILDE_THEORETICAL: "CaseII-tilde",
    Regime.CASE_II_TILDE_EMPIRICAL: "CaseII-tilde",
}


class StatisticRecord(TypedDict):
    """One empirical-versus-theory comparison"""
    statistic: str
    t: Optional[float]
    n: int
    empirical: float
    target: float
    se: float
    z_score: float
    passed: bool
    provenance: str


class CheckRecord(TypedDict):
    """A pass/fail property check without a z-score"""
    check: str
    passed: bool
    detail: Dict[str, Any]
    provenance: str


class ExperimentReport(TypedDict):
    """Deterministic experiment report; wall time is kept separately"""
    name: str
    kind: str
    config: Dict[str, Any]
    records: List[StatisticRecord]
    checks: List[CheckRecord]
    passed: bool
    environment: Dict[str, str]
    wall_time: float


def provenance(tag: str, formula: str) -> str:
    """Theorem tag plus a short hash of the target formula"""
    return f"{tag} | {hashlib.sha1(formula.encode('utf-8')).hexdigest()[:12]}"


def _environment() -> Dict[str, str]:
    return {"python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "pandas": pd.__version__}


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if np.isfinite(value) else str(value)
    return obj


def _volatility_source(bundle: PathBundle):
    """Gaussian-core paths carry no volatility path; their centering uses sigma = I"""
    if bundle.volatility is None:
        return np.eye(bundle.p)
    return bundle


class ExperimentRunner:
    """
    Monte Carlo experiment runner for the BSS limit theorems
    """

    def __init__(self, output_dir: str = DEFAULT_OUTPUT_DIR, progress: bool = True):
        """
        Initialize runner

        Args:
            output_dir: Path for report files
            progress: Show tqdm progress bars over paths
        """
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.progress = progress

    # ------------------------------------------------------------------
    # Building blocks
    # ------------------------------------------------------------------

    def build_spec(self, cfg: ExperimentConfig) -> KernelSpec:
        return KernelSpec.from_dict(cfg.kernels)

    def build_volatility(self, cfg: ExperimentConfig, p: int):
        """Volatility grid from the config; identity constants when omitted"""
        if cfg.volatility is None:
            return constant_volatility(np.eye(p), p)
        grid = tuple(tuple(volatility_from_dict(cell) for cell in row) for row in cfg.volatility)
        if len(grid) != p or any(len(row) != p for row in grid):
            raise ConfigError(f"volatility must be a {p}x{p} grid")
        if all(cell is None for row in grid for cell in row):
            raise ConfigError("Volatility grid is identically zero")
        return grid

    def build_drift(self, cfg: ExperimentConfig, p: int):
        if cfg.drift is None:
            return [drift_from_dict(None) for _ in range(p)]
        if len(cfg.drift) != p:
            raise ConfigError(f"drift needs {p} entries, got {len(cfg.drift)}")
        return [drift_from_dict(d) for d in cfg.drift]

    def simulate(self, cfg: ExperimentConfig, spec: KernelSpec, n: int, volatility) -> List[PathBundle]:
        grid = GridSpec(T=cfg.T, n=n, warmup=cfg.warmup)
        if cfg.variant == "core":
            cov = build_core_covariance(spec, grid, target="component")
            return simulate_gaussian_core(cov, cfg.M, cfg.seed, threads=cfg.threads)
        return simulate_bss(spec, volatility, self.build_drift(cfg, spec.p), grid, variant=cfg.variant,
                            M=cfg.M, seed=cfg.seed, scheme=cfg.scheme, substeps=cfg.substeps, threads=cfg.threads)

    def scaling(self, cfg: ExperimentConfig, spec: KernelSpec, n: int, volatility,
                paths: Optional[List[PathBundle]] = None) -> ScalingFactors:
        return tau_for_regime(spec, n, cfg.regime, mode=cfg.tau_mode,
                              second_moments=volatility_moments(volatility), data=paths)

    def limit_d(self, cfg: ExperimentConfig, spec: KernelSpec, volatility) -> DMatrix:
        """D matching the config's variant and regime"""
        kwargs = dict(n_sequence=cfg.d_n_sequence, K=cfg.d_max_lag)
        if cfg.variant == "core":
            return D_gaussian(spec, regime=cfg.regime, **kwargs)
        if cfg.variant == "X":
            return D_scenario2(spec, vech=spec.p > 2, second_moments=volatility_moments(volatility), **kwargs)
        return D_case1_bss(spec, vech=spec.p > 2, regime=cfg.regime, mode=cfg.tau_mode, **kwargs)

    def _vol_for_target(self, volatility, paths: List[PathBundle]) -> Tuple[bool, Any]:
        if all(cell is None or cell.is_constant for row in volatility for cell in row):
            p = len(volatility)
            return True, np.array([[0.0 if c is None else c.value for c in row] for row in volatility]).reshape(p, p)
        return False, None

    def _record(self, name: str, t: Optional[float], n: int, empirical: float, target: float, se: float,
                mult: float, prov: str) -> StatisticRecord:
        z = z_score(empirical, target, se)
        return {"statistic": name, "t": t, "n": n, "empirical": float(empirical), "target": float(target),
                "se": float(se), "z_score": float(z), "passed": bool(abs(z) <= mult), "provenance": prov}

    def _paths_iter(self, paths: Sequence[PathBundle], desc: str):
        return tqdm(paths, desc=desc, disable=not self.progress, leave=False)

    def _banner(self, title: str, cfg: ExperimentConfig):
        print(f"\n{'='*60}")
        print(f"{title}")
        print(f"{'='*60}")
        print(f"Kernels: p={cfg.kernels.get('p')}, variant={cfg.variant}, regime={cfg.regime}")
        print(f"Grid: n={cfg.n}, T={cfg.T}, M={cfg.M}, seed={cfg.seed}")
        print(f"{'='*60}\n")

    def _report(self, cfg: ExperimentConfig, records: List[StatisticRecord], checks: List[CheckRecord],
                started: float) -> ExperimentReport:
        passed = all(r["passed"] for r in records) and all(c["passed"] for c in checks)
        return {"name": cfg.name, "kind": cfg.kind, "config": cfg.to_dict(), "records": records,
                "checks": checks, "passed": passed, "environment": _environment(),
                "wall_time": time.time() - started}

    # ------------------------------------------------------------------
    # Experiments
    # ------------------------------------------------------------------

    def run_lln_experiment(self, cfg: ExperimentConfig) -> ExperimentReport:
        """
        Realised covariation at the checkpoints against the limit centering R_t

        The comparison is pathwise (statistic minus the path's own R_t), so
        stochastic volatility is handled. Along cfg.n_values the root-mean-square
        error of RC_t - R_t must shrink strictly, and the mean error may not grow
        by more than se_multiplier combined standard errors.
        """
        started = time.time()
        self._banner("LAW OF LARGE NUMBERS", cfg)
        regime = Regime(cfg.regime)
        if regime not in (Regime.CASE_II_BAR, Regime.CASE_II_TILDE_THEORETICAL):
            # empirical tilde factors cannot be re-evaluated at the limit resolution
            raise ConfigError(f"LLN experiments run under CaseII-bar or CaseII-tilde-theoretical, got {regime.value}")
        spec = self.build_spec(cfg)
        volatility = self.build_volatility(cfg, spec.p)
        scenario = BIAS_SCENARIO[regime]
        prov = provenance("LLN", f"R_t = sum r(0) int sigma sigma ds [{scenario}]")
        records: List[StatisticRecord] = []
        checks: List[CheckRecord] = []
        errors: Dict[str, Dict[str, List[float]]] = {}

        for n in cfg.n_values:
            paths = self.simulate(cfg, spec, n, volatility)
            scaling = self.scaling(cfg, spec, n, volatility, paths)
            times = [c * cfg.T for c in cfg.checkpoints]
            stats, diffs, finite_gap = [], [], []
            for bundle in self._paths_iter(paths, f"LLN n={n}"):
                cov = realised_covariation(bundle, scaling)
                limit = bias_term(spec, _volatility_source(bundle), scaling, bundle.grid, scenario, limit=True)
                stats.append([cov.at(t) for t in times])
                diffs.append([cov.at(t) - limit.at(t) for t in times])
                if not finite_gap:
                    finite = bias_term(spec, _volatility_source(bundle), scaling, bundle.grid, scenario, limit=False)
                    finite_gap = [np.abs(finite.at(t) - limit.at(t)) for t in times]
            stats_arr, diff_arr = np.array(stats), np.array(diffs)
            mean, _ = mean_and_se(stats_arr)
            dmean, dse = mean_and_se(diff_arr)
            rms = np.sqrt(np.mean(diff_arr ** 2, axis=0))
            pairs = vech_pairs(spec.p)
            for ti, t in enumerate(times):
                for c, (k, l) in enumerate(pairs):
                    target = mean[ti, c] - dmean[ti, c]
                    records.append(self._record(f"realised_covariation({k},{l})", t, n, mean[ti, c], target,
                                                dse[ti, c], cfg.se_multiplier, prov))
                    entry = errors.setdefault(f"({k},{l})@t={t:g}",
                                              {"rms": [], "mean_error": [], "se": [], "centering_gap": []})
                    entry["rms"].append(float(rms[ti, c]))
                    entry["mean_error"].append(float(abs(dmean[ti, c])))
                    entry["se"].append(float(dse[ti, c]))
                    entry["centering_gap"].append(float(finite_gap[ti][c]))

        for key, entry in errors.items():
            rms_arr = np.array(entry["rms"])
            err, se = np.array(entry["mean_error"]), np.array(entry["se"])
            shrinking = bool(np.all(np.diff(rms_arr) < 0.0))
            band = cfg.se_multiplier * np.sqrt(se[:-1] ** 2 + se[1:] ** 2)
            no_growth = bool(np.all(err[1:] <= err[:-1] + band))
            checks.append({"check": f"lln_error_decreasing {key}", "passed": shrinking and no_growth,
                           "detail": {"n_values": list(cfg.n_values), "rms_shrinking": shrinking,
                                      "mean_error_within_se": no_growth, **entry},
                           "provenance": provenance("LLN", "rms(RC_t - R_t) decreasing in n")})
        report = self._report(cfg, records, checks, started)
        self.print_results(report)
        return report

    def _clt_samples(self, cfg: ExperimentConfig, spec: KernelSpec, volatility, paths: List[PathBundle],
                     scaling: ScalingFactors, t: float) -> Tuple[np.ndarray, np.ndarray]:
        scenario = BIAS_SCENARIO[Regime(cfg.regime)]
        samples, terminal = [], []
        for bundle in self._paths_iter(paths, "CLT statistic"):
            cov = realised_covariation(bundle, scaling)
            bias = bias_term(spec, _volatility_source(bundle),
                             scaling, bundle.grid, scenario)
            samples.append(clt_statistic(cov, bias).at(t))
            terminal.append(bundle.levels[-1, 0])
        return np.array(samples), np.array(terminal)

    def _target_covariance(self, D: DMatrix, volatility, paths: List[PathBundle], t: float) -> np.ndarray:
        constant, sigma = self._vol_for_target(volatility, paths)
        if D.descriptor.scheme == "PairSquare":
            return statistic_covariance(D, np.eye(D.descriptor.p), t)
        if constant:
            return statistic_covariance(D, sigma, t)
        return np.mean([statistic_covariance(D, b.volatility, t, dt=b.grid.dt) for b in paths], axis=0)

    def run_clt_experiment(self, cfg: ExperimentConfig) -> ExperimentReport:
        """
        Covariance of the centered sqrt(n) statistic at t = T against int_0^T V D V^T ds
        """
        started = time.time()
        self._banner("CENTRAL LIMIT THEOREM", cfg)
        spec = self.build_spec(cfg)
        volatility = self.build_volatility(cfg, spec.p)
        t = cfg.T
        paths = self.simulate(cfg, spec, cfg.n, volatility)
        scaling = self.scaling(cfg, spec, cfg.n, volatility, paths)
        D = self.limit_d(cfg, spec, volatility)
        target = self._target_covariance(D, volatility, paths, t)
        samples, terminal = self._clt_samples(cfg, spec, volatility, paths, scaling, t)
        return self._clt_report(cfg, samples, terminal, target, D, started)

    def run_gaussian_core_clt(self, cfg: ExperimentConfig) -> ExperimentReport:
        """Gaussian-core CLT: variant core, Case I normalization, D from the p^2 statistic"""
        if cfg.variant != "core":
            raise ConfigError("Gaussian-core CLT runs on the core variant")
        return self.run_clt_experiment(cfg)

    def _clt_report(self, cfg: ExperimentConfig, samples: np.ndarray, terminal: np.ndarray, target: np.ndarray,
                    D: DMatrix, started: float) -> ExperimentReport:
        pairs = vech_pairs(int(cfg.kernels["p"]))
        cov, se = covariance_and_se(samples, seed=cfg.seed)
        mean, mean_se = mean_and_se(samples)
        prov = provenance("CLT", f"int_0^t V D V^T ds [{D.descriptor.scheme}, {D.regime}]")
        records: List[StatisticRecord] = []
        for i, a in enumerate(pairs):
            for j in range(i, len(pairs)):
                b = pairs[j]
                records.append(self._record(f"cov[clt{a}, clt{b}]", cfg.T, cfg.n, cov[i, j], target[i, j],
                                            se[i, j], cfg.se_multiplier, prov))
        checks: List[CheckRecord] = []
        centered = bool(np.all(np.abs(mean) <= 4.0 * mean_se))
        checks.append({"check": "clt_mean_zero", "passed": centered,
                       "detail": {"mean": mean, "se": mean_se}, "provenance": provenance("CLT", "E[limit] = 0")})
        pvalues = jarque_bera_pvalues(samples)
        level = NORMALITY_LEVEL / len(pvalues)
        checks.append({"check": "clt_normality", "passed": bool(np.all(pvalues > level)),
                       "detail": {"pvalues": pvalues, "level": level},
                       "provenance": provenance("CLT", "Jarque-Bera, Bonferroni")})
        # the limit is independent of the core, so the terminal core level is uncorrelated with it
        corr = [float(np.corrcoef(samples[:, c], terminal)[0, 1]) for c in range(samples.shape[1])]
        bound = cfg.se_multiplier / np.sqrt(len(terminal))
        checks.append({"check": "limit_independent_of_core", "passed": bool(np.all(np.abs(corr) <= bound)),
                       "detail": {"correlation": corr, "bound": bound},
                       "provenance": provenance("stable", "corr(limit, G_T) = 0")})
        checks.append({"check": "d_diagnostics", "passed": True, "detail": D.diagnostics,
                       "provenance": provenance("D", "n-sequence convergence record")})
        report = self._report(cfg, records, checks, started)
        self.print_results(report)
        return report

    def run_feasible_experiment(self, cfg: ExperimentConfig) -> ExperimentReport:
        """
        Correlation ratio and relative covolatility against their centering ratios,
        their sqrt(n)-scaled fluctuations against the delta-method covariances, and
        invariance under componentwise rescaling
        """
        started = time.time()
        self._banner("FEASIBLE STATISTICS", cfg)
        spec = self.build_spec(cfg)
        p = spec.p
        volatility = self.build_volatility(cfg, p)
        regime = Regime(cfg.regime)
        scenario = BIAS_SCENARIO[regime]
        paths = self.simulate(cfg, spec, cfg.n, volatility)
        scaling = self.scaling(cfg, spec, cfg.n, volatility, paths)
        half, T, n = 0.5 * cfg.T, cfg.T, cfg.n
        pairs = vech_pairs(p)

        corr_values, rel_values, corr_fluct, rel_fluct, bounded, pinned = [], [], [], [], True, True
        corr_targets, rel_targets = [], []
        R_half_all, R_T_all = [], []
        for bundle in self._paths_iter(paths, "feasible"):
            bias = bias_term(spec, _volatility_source(bundle), scaling, bundle.grid, scenario)
            R_half, R_T = bias.at(half), bias.at(T)
            R_half_all.append(R_half)
            R_T_all.append(R_T)
            ratio = correlation_ratio(bundle, epsilon=cfg.epsilon)
            rel = relative_covolatility(bundle)
            bounded &= bool(np.all(np.abs(ratio.values) <= 1.0))
            pinned &= bool(np.all(rel.values[-1] == 1.0))
            diag = {k: R_half[pairs.index((k, k))] for k in range(1, p + 1)}
            corr_target = np.array([R_half[c] / np.sqrt(diag[k] * diag[l]) for c, (k, l) in enumerate(pairs)])
            rel_target = np.divide(R_half, R_T, out=np.full_like(R_half, np.nan), where=R_T != 0.0)
            corr_values.append(ratio.at(half))
            rel_values.append(rel.at(half))
            corr_targets.append(corr_target)
            rel_targets.append(rel_target)
            corr_fluct.append(np.sqrt(n) * (ratio.at(half) - corr_target))
            rel_fluct.append(np.sqrt(n) * (rel.at(half) - rel_target))

        records: List[StatisticRecord] = []
        checks: List[CheckRecord] = [
            {"check": "correlation_ratio_bounded", "passed": bounded, "detail": {},
             "provenance": provenance("feasible", "Cauchy-Schwarz on realized sums")},
            {"check": "relative_covolatility_terminal_one", "passed": pinned, "detail": {},
             "provenance": provenance("feasible", "S_T / S_T = 1")},
        ]
        prov_ucp = provenance("feasible-ucp", "R_kl / sqrt(R_kk R_ll); R_t / R_T")
        for name, values, targets in (("correlation_ratio", corr_values, corr_targets),
                                      ("relative_covolatility", rel_values, rel_targets)):
            diff_mean, diff_se = mean_and_se(np.array(values) - np.array(targets))
            emp_mean, _ = mean_and_se(np.array(values))
            for c, (k, l) in enumerate(pairs):
                if name == "correlation_ratio" and k == l:
                    continue
                if not np.isfinite(diff_mean[c]):
                    continue
                records.append(self._record(f"{name}({k},{l})", half, n, emp_mean[c], emp_mean[c] - diff_mean[c],
                                            diff_se[c], cfg.se_multiplier, prov_ucp))

        # fluctuations against the delta-method covariance
        D = self.limit_d(cfg, spec, volatility)
        sigma_half = self._target_covariance(D, volatility, paths, half)
        sigma_T = self._target_covariance(D, volatility, paths, T)
        R_half_mean, R_T_mean = np.mean(R_half_all, axis=0), np.mean(R_T_all, axis=0)
        for kind, fluct in (("CorrelationRatio", corr_fluct), ("RelativeCovolatility", rel_fluct)):
            try:
                limit = ratio_limit_covariance(sigma_half, R_half_mean, kind, sigma_T=sigma_T, R_T=R_T_mean)
            except BSSError as e:
                logger.warning("Skipping %s fluctuation check: %s", kind, e)
                continue
            fl = np.array(fluct)
            keep = np.all(np.isfinite(fl), axis=0)
            cov, se = covariance_and_se(fl[:, keep], seed=cfg.seed)
            idx = np.flatnonzero(keep)
            prov = provenance(f"feasible-CLT {kind}", limit.formula_hash)
            for a, c in enumerate(idx):
                k, l = pairs[c]
                if kind == "CorrelationRatio" and k == l:
                    continue
                records.append(self._record(f"var[{kind}({k},{l})]", half, n, cov[a, a], limit.matrix[c, c],
                                            se[a, a], cfg.se_multiplier, prov))

        # componentwise rescaling by powers of two leaves both ratios bit-identical
        factors = [2.0 ** (k + 1) for k in range(p)]
        base, scaled = paths[0], paths[0].scaled(factors)
        same = (np.array_equal(correlation_ratio(base, cfg.epsilon).values, correlation_ratio(scaled, cfg.epsilon).values)
                and np.array_equal(relative_covolatility(base).values, relative_covolatility(scaled).values))
        checks.append({"check": "rescaling_invariance", "passed": bool(same), "detail": {"factors": factors},
                       "provenance": provenance("feasible", "ratio cancels componentwise scale")})
        report = self._report(cfg, records, checks, started)
        self.print_results(report)
        return report

    def audit_kernel(self, delta: float, lam: float, n: int, max_lag: int,
                     n_grid: Sequence[int], kappas: Sequence[float]) -> Dict[str, Any]:
        """
        Assumption diagnostics for one gamma kernel; out-of-range delta is rejected

        In-range kernels get pass or warn. Warn means a sufficient decay
        condition failed at finite n, which is expected for delta >= 0.
        """
        if not DELTA_LOWER < delta < DELTA_UPPER:
            return {"delta": delta, "lambda": lam, "verdict": "rejected",
                    "reason": "delta outside (-1/2, 1/2)"}
        try:
            kernel = GammaKernel(delta, lam)
        except InvalidModel as e:
            return {"delta": delta, "lambda": lam, "verdict": "rejected", "reason": str(e)}
        spec = KernelSpec(1, ((kernel,),))
        table = correlation_table(core_family(spec), n, max_lag)
        squared = check_assumption_squared_correlations(table, max_lag)
        pi = check_assumption_pi_decay(kernel, n_grid, kappas)
        r = table.as_array()[0, 0]
        limit = limiting_correlations(delta, max_lag)
        verdicts = {squared["verdict"], pi["verdict"]}
        return {
            "delta": delta, "lambda": lam,
            "verdict": "pass" if verdicts == {"pass"} else "warn",
            "squared_correlations": squared["verdict"],
            "squared_partial_sum": squared["records"][0]["partial_sum"],
            "squared_exponent": squared["records"][0]["summand_exponent"],
            "pi_decay": pi["verdict"],
            "pi_fitted_lambda": [rec["fitted_lambda"] for rec in pi["records"]],
            "max_gap_to_limit": float(np.max(np.abs(r[1:] - limit[1:]))),
        }

    def run_assumption_audit(self, cfg: ExperimentConfig) -> ExperimentReport:
        """
        Assumption diagnostics over the (delta, lambda) grid

        Passes when every delta outside (-1/2, 1/2) is rejected and none inside is.
        """
        started = time.time()
        self._banner("ASSUMPTION AUDIT", cfg)
        checks: List[CheckRecord] = []
        for delta in cfg.audit_deltas:
            for lam in cfg.audit_lambdas:
                result = self.audit_kernel(delta, lam, cfg.audit_n, cfg.audit_max_lag, cfg.audit_n_grid, cfg.audit_kappas)
                in_range = DELTA_LOWER < delta < DELTA_UPPER
                ok = (result["verdict"] != "rejected") if in_range else (result["verdict"] == "rejected")
                checks.append({"check": f"audit delta={delta:g} lambda={lam:g}", "passed": bool(ok),
                               "detail": result, "provenance": provenance("assumptions", "delta in (-1/2, 1/2)")})
        report = self._report(cfg, [], checks, started)
        self.print_results(report)
        return report

    def run(self, cfg: ExperimentConfig) -> ExperimentReport:
        """Dispatch on cfg.kind"""
        dispatch = {
            "LLN": self.run_lln_experiment,
            "CLT": self.run_clt_experiment,
            "GaussianCoreCLT": self.run_gaussian_core_clt,
            "FeasibleRatio": self.run_feasible_experiment,
            "AssumptionAudit": self.run_assumption_audit,
        }
        return dispatch[cfg.kind](cfg)

    # ------------------------------------------------------------------
    # Output
    # ------------------------------------------------------------------

    def print_results(self, report: ExperimentReport) -> None:
        """
        Print the report in a formatted table

        Args:
            report: Experiment report
        """
        print(f"\n{'='*60}")
        print(f"{report['kind'].upper()} RESULTS: {report['name']}")
        print(f"{'='*60}")
        if report["records"]:
            print(self.records_frame(report).to_string(index=False))
        for check in report["checks"]:
            print(f"  [{'PASS' if check['passed'] else 'FAIL'}] {check['check']}")
        print(f"\nOverall: {'PASS' if report['passed'] else 'FAIL'} ({report['wall_time']:.1f}s)")
        print(f"{'='*60}\n")

    def records_frame(self, report: ExperimentReport) -> pd.DataFrame:
        columns = ["statistic", "t", "n", "empirical", "target", "se", "z_score", "passed"]
        return pd.DataFrame(report["records"], columns=columns + ["provenance"])[columns]

    def emit_report(self, report: ExperimentReport, formats: Sequence[str] = ("json", "table", "plot-data"),
                    name: Optional[str] = None) -> List[Path]:
        """
        Write the report in the requested formats

        json:      deterministic report (wall time goes to <name>.timing.json)
        table:     fixed-width text table
        plot-data: CSV with statistic, t, value, target and the SE band
        png:       z-scores per record

        Returns:
            Paths written
        """
        stem = name or report["name"]
        written: List[Path] = []
        body = {k: v for k, v in report.items() if k != "wall_time"}
        try:
            if "json" in formats:
                path = self.output_dir / f"{stem}.json"
                with open(path, "w") as f:
                    json.dump(_jsonable(body), f, indent=2, sort_keys=True)
                timing = self.output_dir / f"{stem}.timing.json"
                with open(timing, "w") as f:
                    json.dump({"wall_time": report["wall_time"]}, f)
                written += [path, timing]
            frame = self.records_frame(report)
            if "table" in formats:
                path = self.output_dir / f"{stem}.txt"
                with open(path, "w") as f:
                    f.write(self.generate_summary_report(report))
                written.append(path)
            if "plot-data" in formats:
                path = self.output_dir / f"{stem}_plot.csv"
                mult = report["config"].get("se_multiplier", 3.0)
                plot = frame[["statistic", "t", "empirical", "target", "se"]].rename(columns={"empirical": "value"})
                plot["band_lower"] = plot["target"] - mult * plot["se"]
                plot["band_upper"] = plot["target"] + mult * plot["se"]
                plot.to_csv(path, index=False, float_format="%.17g")
                written.append(path)
            if "png" in formats and len(frame) > 0:
                written.append(self.plot_z_scores(report, stem))
        except Exception as e:
            print(f"Error writing report: {e}")
            raise
        for path in written:
            print(f"Report written to {path}")
        return written

    def generate_summary_report(self, report: ExperimentReport) -> str:
        lines = []
        lines.append("=" * 80)
        lines.append(f"{report['kind'].upper()} EXPERIMENT REPORT: {report['name']}")
        lines.append("=" * 80)
        lines.append("")
        cfg = report["config"]
        lines.append("CONFIGURATION:")
        lines.append(f"  Kernels: p={cfg['kernels'].get('p')}  variant={cfg['variant']}  regime={cfg['regime']}")
        lines.append(f"  Grid: n={cfg['n']}  T={cfg['T']}  M={cfg['M']}  seed={cfg['seed']}")
        lines.append("")
        if report["records"]:
            lines.append("RECORDS:")
            lines.append(self.records_frame(report).to_string(index=False, float_format=lambda x: f"{x: .6g}"))
            lines.append("")
        lines.append("CHECKS:")
        for check in report["checks"]:
            lines.append(f"  [{'PASS' if check['passed'] else 'FAIL'}] {check['check']}")
        lines.append("")
        lines.append(f"OVERALL: {'PASS' if report['passed'] else 'FAIL'}")
        lines.append("=" * 80)
        return "\n".join(lines)

    def plot_z_scores(self, report: ExperimentReport, stem: str) -> Path:
        frame = self.records_frame(report)
        mult = report["config"].get("se_multiplier", 3.0)
        fig, ax = plt.subplots(figsize=(12, 6))
        colors = ["tab:green" if ok else "tab:red" for ok in frame["passed"]]
        ax.bar(range(len(frame)), frame["z_score"].clip(-10, 10), color=colors)
        ax.axhline(mult, color="k", linestyle="--", linewidth=1)
        ax.axhline(-mult, color="k", linestyle="--", linewidth=1)
        ax.set_title(f"z-scores - {report['name']}")
        ax.set_xlabel("Record")
        ax.set_ylabel("z")
        ax.grid(True, alpha=0.3)
        output_path = self.output_dir / f"{stem}_zscores.png"
        plt.savefig(output_path, dpi=150, bbox_inches='tight')
        plt.close()
        return output_path


def main() -> None:
    """Run every config given on the command line"""
    import sys

    runner = ExperimentRunner()
    for file in sys.argv[1:]:
        cfg = ExperimentConfig.from_file(file)
        report = runner.run(cfg)
        runner.emit_report(report, cfg.formats)


if __name__ == "__main__":
    main()
