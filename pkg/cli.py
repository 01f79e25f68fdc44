"""
Command-line front end

    simulate      simulate BSS or Gaussian-core paths to CSV
    covariation   realised covariation (and centered CLT statistic) of path files
    feasible      correlation ratio and relative covolatility of path files
    asymptotics   compute and save a D matrix
    audit         assumption sweep over a (delta, lambda) grid
    experiment    run <config>: run a JSON experiment config and emit its report
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from asymptotics import D_case1_bss, D_gaussian, D_scenario2, save_d_matrix
from config.constants import D_N_SEQUENCE
from config.paths import DEFAULT_DATA_DIR, DEFAULT_LOGS_DIR, DEFAULT_OUTPUT_DIR
from config.settings import REPORT_FORMATS, ExperimentConfig
from covariation import bias_term, clt_statistic, correlation_ratio, realised_covariation, relative_covolatility
from data_loader import PathDataLoader
from exceptions import BSSError
from harness import BIAS_SCENARIO, ExperimentRunner
from kernel import KernelSpec
from scaling import Regime, TauMode, tau_for_regime
from simulate import (
    GridSpec,
    build_core_covariance,
    constant_volatility,
    drift_from_dict,
    simulate_bss,
    simulate_gaussian_core,
    volatility_moments,
)
from sweep import AssumptionSweep

logger = logging.getLogger(__name__)


def _floats(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> List[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def load_kernels(args: argparse.Namespace) -> KernelSpec:
    """Kernel grid from --kernels JSON, or a uniform grid from --p/--delta/--lambda"""
    if args.kernels:
        with open(args.kernels) as f:
            return KernelSpec.from_dict(json.load(f))
    return KernelSpec.uniform(args.p, args.delta, args.lam, diagonal=args.diagonal)


def _sigma(args: argparse.Namespace, p: int) -> np.ndarray:
    """Constant volatility from --sigma: one value (identity times it), p diagonal values or p*p row-major"""
    values = _floats(args.sigma) if args.sigma else [1.0]
    if len(values) == 1:
        return values[0] * np.eye(p)
    if len(values) == p:
        return np.diag(values)
    if len(values) == p * p:
        return np.array(values).reshape(p, p)
    raise BSSError(f"--sigma needs 1, {p} or {p * p} values, got {len(values)}")


def _add_kernel_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--kernels", help="Kernel grid JSON file")
    parser.add_argument("--p", type=int, default=1, help="Dimension for a uniform grid")
    parser.add_argument("--delta", type=float, default=0.25, help="Gamma kernel delta")
    parser.add_argument("--lambda", dest="lam", type=float, default=1.0, help="Gamma kernel lambda")
    parser.add_argument("--diagonal", action="store_true", help="Only diagonal kernel cells")


def cmd_simulate(args: argparse.Namespace) -> int:
    spec = load_kernels(args)
    grid = GridSpec(T=args.T, n=args.n)
    if args.variant == "core":
        bundles = simulate_gaussian_core(build_core_covariance(spec, grid), args.M, args.seed, threads=args.threads)
    else:
        sigma = _sigma(args, spec.p)
        volatility = constant_volatility(sigma, spec.p)
        drift = [drift_from_dict(None) for _ in range(spec.p)]
        bundles = simulate_bss(spec, volatility, drift, grid, variant=args.variant, M=args.M, seed=args.seed,
                               threads=args.threads)
    loader = PathDataLoader(args.out_dir)
    for bundle in bundles:
        path = loader.export_paths(bundle, f"{args.prefix}_{bundle.meta['path']:05d}.csv")
        logger.info("Wrote %s", path)
    if args.parquet:
        loader.export_parquet(bundles, f"{args.prefix}.parquet")
    print(f"Simulated {len(bundles)} {args.variant} paths (p={spec.p}, N={grid.N})")
    return 0


def cmd_covariation(args: argparse.Namespace) -> int:
    spec = load_kernels(args)
    loader = PathDataLoader(args.out_dir)
    out_dir = Path(args.out_dir)
    regime = Regime(args.scaling)
    sigma = _sigma(args, spec.p)
    for file in args.paths:
        bundle = loader.ingest_paths(file)
        scaling = tau_for_regime(spec, bundle.grid.n, regime, mode=args.tau_mode,
                                 second_moments=volatility_moments(constant_volatility(sigma, spec.p)),
                                 data=[bundle])
        cov = realised_covariation(bundle, scaling)
        frame = cov.to_frame()
        stem = Path(file).stem
        frame.to_csv(out_dir / f"{stem}_covariation.csv", index=False, float_format="%.17g")
        if args.clt:
            bias = bias_term(spec, sigma, scaling, bundle.grid, BIAS_SCENARIO[regime])
            clt_statistic(cov, bias).to_frame().to_csv(out_dir / f"{stem}_clt.csv", index=False,
                                                       float_format="%.17g")
        print(f"{stem}: realised covariation at T = {np.array2string(cov.values[-1], precision=6)}")
    return 0


def cmd_feasible(args: argparse.Namespace) -> int:
    loader = PathDataLoader(args.out_dir)
    out_dir = Path(args.out_dir)
    for file in args.paths:
        bundle = loader.ingest_paths(file)
        stem = Path(file).stem
        ratio = correlation_ratio(bundle, epsilon=args.epsilon)
        rel = relative_covolatility(bundle)
        ratio.to_frame().to_csv(out_dir / f"{stem}_correlation_ratio.csv", index=False, float_format="%.17g")
        rel.to_frame().to_csv(out_dir / f"{stem}_relative_covolatility.csv", index=False, float_format="%.17g")
        print(f"{stem}: correlation ratio at T = {np.array2string(ratio.values[-1], precision=6)}")
    return 0


def cmd_asymptotics(args: argparse.Namespace) -> int:
    spec = load_kernels(args)
    n_sequence = _ints(args.n_sequence)
    common = dict(n_sequence=n_sequence, K=args.max_lag, check_convergence=not args.no_convergence_check,
                  check_assumptions=args.check_assumptions)
    if args.kind == "gaussian":
        D = D_gaussian(spec, regime=args.scaling, **common)
    elif args.kind == "case1":
        D = D_case1_bss(spec, vech=args.vech, regime=args.scaling, mode=args.tau_mode, **common)
    else:
        second = volatility_moments(constant_volatility(_sigma(args, spec.p), spec.p))
        D = D_scenario2(spec, vech=args.vech, second_moments=second, **common)
    path, header = save_d_matrix(D, Path(args.out_dir) / f"D_{D.descriptor.scheme}.csv")
    print(f"D ({D.descriptor.scheme}, {D.values.shape[0]}x{D.values.shape[1]}) saved to {path}")
    print(f"Diagnostics: {D.diagnostics}")
    return 0


def cmd_audit(args: argparse.Namespace) -> int:
    sweep = AssumptionSweep(output_dir=args.out_dir, n=args.n, max_lag=args.max_lag)
    df = sweep.run_audit({'delta': _floats(args.deltas), 'lambda': _floats(args.lambdas)})
    sweep.print_top_results(df)
    report = sweep.generate_summary_report(df)
    print(report)
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    if args.scaling is not None:
        cfg.regime = args.scaling
    if args.out_dir is not None:
        cfg.output_dir = args.out_dir
    if args.format:
        cfg.formats = args.format
    cfg.validate()
    runner = ExperimentRunner(output_dir=cfg.output_dir, progress=not args.quiet)
    report = runner.run(cfg)
    runner.emit_report(report, cfg.formats)
    return 0 if report["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bss", description="Multivariate Brownian semistationary toolkit")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--log-file", action="store_true", help=f"Also log to {DEFAULT_LOGS_DIR}/bss.log")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Simulate paths")
    _add_kernel_args(p)
    p.add_argument("--variant", choices=["Y", "X", "core"], default="Y")
    p.add_argument("--sigma", help="Constant volatility values")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--M", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out-dir", default=DEFAULT_DATA_DIR)
    p.add_argument("--prefix", default="paths")
    p.add_argument("--parquet", action="store_true", help="Also write all paths into one parquet file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("covariation", help="Realised covariation of path files")
    _add_kernel_args(p)
    p.add_argument("paths", nargs="+")
    p.add_argument("--scaling", default=Regime.CASE_II_BAR.value, choices=[r.value for r in Regime])
    p.add_argument("--tau-mode", default=TauMode.SUM_DIAGONAL.value, choices=[m.value for m in TauMode])
    p.add_argument("--sigma", help="Constant volatility values for centering")
    p.add_argument("--clt", action="store_true", help="Also write the centered sqrt(n) statistic")
    p.add_argument("--out-dir", default=DEFAULT_OUTPUT_DIR)
    p.set_defaults(func=cmd_covariation)

    p = sub.add_parser("feasible", help="Feasible ratio statistics of path files")
    p.add_argument("paths", nargs="+")
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--out-dir", default=DEFAULT_OUTPUT_DIR)
    p.set_defaults(func=cmd_feasible)

    p = sub.add_parser("asymptotics", help="Compute a D matrix")
    _add_kernel_args(p)
    p.add_argument("--kind", choices=["gaussian", "case1", "scenario2"], default="gaussian")
    p.add_argument("--scaling", default=Regime.CASE_I.value, choices=[r.value for r in Regime])
    p.add_argument("--tau-mode", default=TauMode.SUM_DIAGONAL.value, choices=[m.value for m in TauMode])
    p.add_argument("--sigma", help="Constant volatility values (scenario2 second moments)")
    p.add_argument("--n-sequence", default=",".join(str(n) for n in D_N_SEQUENCE))
    p.add_argument("--max-lag", type=int, default=None)
    p.add_argument("--vech", action="store_true")
    p.add_argument("--no-convergence-check", action="store_true")
    p.add_argument("--check-assumptions", action="store_true")
    p.add_argument("--out-dir", default=DEFAULT_OUTPUT_DIR)
    p.set_defaults(func=cmd_asymptotics)

    p = sub.add_parser("audit", help="Assumption sweep")
    p.add_argument("--deltas", default="-0.25,0,0.1,0.25,0.4,0.6")
    p.add_argument("--lambdas", default="0.5,1,2")
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--max-lag", type=int, default=200)
    p.add_argument("--out-dir", default=DEFAULT_OUTPUT_DIR)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("experiment", help="Run experiment configs")
    exp = p.add_subparsers(dest="action", required=True)
    run = exp.add_parser("run", help="Run one JSON config")
    run.add_argument("config")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--threads", type=int, default=None)
    run.add_argument("--scaling", default=None, choices=[r.value for r in Regime])
    run.add_argument("--out-dir", default=None)
    run.add_argument("--format", action="append", choices=list(REPORT_FORMATS))
    run.add_argument("--quiet", action="store_true", help="Hide progress bars")
    run.set_defaults(func=cmd_experiment)
    return parser


def configure_logging(level: str, to_file: bool = False) -> None:
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if to_file:
        Path(DEFAULT_LOGS_DIR).mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(Path(DEFAULT_LOGS_DIR) / "bss.log"))
    logging.basicConfig(level=getattr(logging, level), handlers=handlers, force=True,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level, args.log_file)
    try:
        return args.func(args)
    except BSSError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
