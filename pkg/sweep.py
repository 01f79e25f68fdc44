"""
Sweep Module - Parameter-grid sweeps over gamma kernels
Assumption diagnostics across a (delta, lambda) grid and convergence of the
increment correlations to their limit along n = 2^j
"""

import logging
from itertools import product
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
from tqdm import tqdm

from config.paths import DEFAULT_OUTPUT_DIR
from harness import ExperimentRunner
from kernel import KernelSpec, core_family, correlation_table, limiting_correlations

logger = logging.getLogger(__name__)


class AssumptionSweep:
    """
    Assumption audit over a (delta, lambda) grid

    Each combination is audited by ExperimentRunner.audit_kernel; delta
    outside (-1/2, 1/2) is rejected without numerical work.
    """

    def __init__(
        self,
        output_dir: str = DEFAULT_OUTPUT_DIR,
        max_combinations: int = 200,
        n: int = 1024,
        max_lag: int = 200,
        n_grid: Sequence[int] = (256, 1024, 4096),
        kappas: Sequence[float] = (0.25, 0.5, 0.75),
    ):
        """
        Initialize sweep

        Args:
            output_dir: Path for output files
            max_combinations: Maximum grid points to audit
            n: Resolution of the correlation tables
            max_lag: Lags in the squared-correlation check
            n_grid: Resolutions for the pi-decay fit
            kappas: Cut exponents for the pi-decay fit
        """
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.max_combinations = max_combinations
        self.n = n
        self.max_lag = max_lag
        self.n_grid = list(n_grid)
        self.kappas = list(kappas)
        self.runner = ExperimentRunner(output_dir=str(self.output_dir), progress=False)

    def define_search_space(self) -> Dict[str, List[float]]:
        """
        Define the kernel parameter grid

        Returns:
            Dictionary with parameter ranges
        """
        return {
            'delta': [-0.4, -0.25, -0.1, 0.0, 0.1, 0.25, 0.4, 0.6],
            'lambda': [0.5, 1.0, 2.0],
        }

    def generate_parameter_combinations(self, search_space: Optional[Dict[str, List[float]]] = None) -> List[Dict[str, Any]]:
        """
        Generate all parameter combinations, sampling down to max_combinations

        Returns:
            List of parameter dictionaries
        """
        search_space = search_space or self.define_search_space()
        keys = list(search_space.keys())
        values = list(search_space.values())
        all_combinations = [dict(zip(keys, combo)) for combo in product(*values)]

        if len(all_combinations) > self.max_combinations:
            print(f"Warning: Total combinations ({len(all_combinations)}) exceeds max ({self.max_combinations})")
            print(f"Sampling {self.max_combinations} combinations...")
            rng = np.random.default_rng(42)
            indices = np.sort(rng.choice(len(all_combinations), self.max_combinations, replace=False))
            combinations = [all_combinations[i] for i in indices]
        else:
            combinations = all_combinations

        print(f"Generated {len(combinations)} parameter combinations to audit")
        return combinations

    def run_audit(self, search_space: Optional[Dict[str, List[float]]] = None) -> pd.DataFrame:
        """
        Audit every combination

        Returns:
            DataFrame with one row per (delta, lambda), sorted by delta then lambda
        """
        print(f"\n{'='*60}")
        print("ASSUMPTION SWEEP")
        print(f"{'='*60}\n")

        results = []
        for params in tqdm(self.generate_parameter_combinations(search_space), desc="audit"):
            try:
                result = self.runner.audit_kernel(params['delta'], params['lambda'], self.n, self.max_lag,
                                                  self.n_grid, self.kappas)
            except Exception as e:
                logger.error("Audit failed for delta=%s lambda=%s: %s", params['delta'], params['lambda'], e)
                result = {"delta": params['delta'], "lambda": params['lambda'], "verdict": "error", "reason": str(e)}
            if "pi_fitted_lambda" in result:
                result["pi_fitted_lambda"] = float(np.max(result["pi_fitted_lambda"]))
            results.append(result)

        results_df = pd.DataFrame(results).sort_values(['delta', 'lambda']).reset_index(drop=True)
        self._save_results(results_df, "audit_results.csv")
        return results_df

    def _save_results(self, df: pd.DataFrame, filename: str) -> None:
        output_path = self.output_dir / filename
        try:
            df.to_csv(output_path, index=False, float_format="%.10g")
            print(f"\nResults saved to {output_path}")
        except Exception as e:
            print(f"Error saving results to CSV: {e}")
            raise

    def print_top_results(self, df: pd.DataFrame) -> None:
        print(f"\n{'='*80}")
        print("AUDIT VERDICTS")
        print(f"{'='*80}\n")
        display_cols = ['delta', 'lambda', 'verdict', 'squared_correlations', 'pi_decay',
                        'squared_exponent', 'pi_fitted_lambda', 'max_gap_to_limit']
        existing_cols = [col for col in display_cols if col in df.columns]
        print(df[existing_cols].to_string(index=False))

    def analyze_parameter_impact(self, df: pd.DataFrame) -> pd.DataFrame:
        """Verdict counts per delta"""
        print(f"\n{'='*80}")
        print("VERDICTS BY DELTA")
        print(f"{'='*80}\n")
        grouped = df.groupby('delta')['verdict'].value_counts().unstack(fill_value=0).reset_index()
        print(grouped.to_string(index=False))
        return grouped

    def generate_summary_report(self, df: pd.DataFrame) -> str:
        report = []
        report.append("=" * 80)
        report.append("GAMMA KERNEL ASSUMPTION AUDIT SUMMARY")
        report.append("=" * 80)
        report.append("")
        report.append("OVERALL:")
        report.append(f"  Combinations audited: {len(df)}")
        for verdict in ("pass", "warn", "rejected", "error"):
            report.append(f"  {verdict}: {int((df['verdict'] == verdict).sum())}")
        report.append("")
        in_range = df[(df['delta'] > -0.5) & (df['delta'] < 0.5)]
        out_range = df[~df.index.isin(in_range.index)]
        report.append("DOMAIN CHECK:")
        report.append(f"  delta in (-1/2, 1/2) accepted: {bool((in_range['verdict'] != 'rejected').all())}")
        report.append(f"  delta outside rejected: {bool((out_range['verdict'] == 'rejected').all())}")
        report.append("")
        warned = df[df['verdict'] == 'warn']
        if len(warned) > 0:
            report.append("WARNINGS:")
            for _, row in warned.iterrows():
                report.append(f"  delta={row['delta']:g}, lambda={row['lambda']:g}: "
                              f"squared={row.get('squared_correlations')}, pi={row.get('pi_decay')}")
            report.append("")
        report.append("=" * 80)
        return "\n".join(report)


class ConvergenceSweep:
    """
    Error of the finite-n increment correlations against the fractional-noise limit
    """

    def __init__(
        self,
        output_dir: str = DEFAULT_OUTPUT_DIR,
        exponents: Sequence[int] = tuple(range(8, 15)),
        max_lag: int = 20,
    ):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.exponents = list(exponents)
        self.max_lag = max_lag

    def correlation_error(self, delta: float, lam: float, n: int) -> float:
        """max_{1 <= k <= max_lag} |r_n(k) - rho(k)| for a single gamma kernel"""
        spec = KernelSpec.uniform(1, delta, lam)
        table = correlation_table(core_family(spec), n, self.max_lag)
        r = table.as_array()[0, 0]
        limit = limiting_correlations(delta, self.max_lag)
        return float(np.max(np.abs(r[1:] - limit[1:])))

    def run(self, deltas: Sequence[float] = (-0.25, 0.1, 0.25, 0.4),
            lambdas: Sequence[float] = (0.5, 1.0, 2.0)) -> pd.DataFrame:
        """
        Errors for every (delta, lambda, n = 2^j)

        Returns:
            DataFrame with columns delta, lambda, n, max_error, monotone
        """
        print(f"\n{'='*60}")
        print("CORRELATION CONVERGENCE SWEEP")
        print(f"{'='*60}\n")
        rows = []
        for delta, lam in tqdm(list(product(deltas, lambdas)), desc="convergence"):
            errors = [self.correlation_error(delta, lam, 2 ** j) for j in self.exponents]
            monotone = bool(np.all(np.diff(errors) < 0.0))
            if not monotone:
                logger.warning("Correlation error not monotone for delta=%g lambda=%g", delta, lam)
            for j, err in zip(self.exponents, errors):
                rows.append({"delta": delta, "lambda": lam, "n": 2 ** j, "max_error": err, "monotone": monotone})
        df = pd.DataFrame(rows)
        output_path = self.output_dir / "convergence_results.csv"
        try:
            df.to_csv(output_path, index=False, float_format="%.10g")
            print(f"\nResults saved to {output_path}")
        except Exception as e:
            print(f"Error saving results to CSV: {e}")
            raise
        return df

    def plot_convergence(self, df: pd.DataFrame) -> Path:
        fig, ax = plt.subplots(figsize=(10, 6))
        for (delta, lam), group in df.groupby(['delta', 'lambda']):
            ax.loglog(group['n'], group['max_error'], marker='o', label=f"delta={delta:g}, lambda={lam:g}")
        ax.set_title('Increment correlation error vs n')
        ax.set_xlabel('n')
        ax.set_ylabel('max |r_n(k) - rho(k)|')
        ax.grid(True, which='both', alpha=0.3)
        ax.legend(fontsize=8)
        output_path = self.output_dir / "convergence.png"
        plt.savefig(output_path, dpi=150, bbox_inches='tight')
        plt.close()
        print(f"Convergence plot saved to {output_path}")
        return output_path


def main() -> None:
    """Run the assumption and convergence sweeps"""
    audit = AssumptionSweep(output_dir="./results", max_combinations=200)
    results_df = audit.run_audit()
    audit.print_top_results(results_df)
    audit.analyze_parameter_impact(results_df)
    report = audit.generate_summary_report(results_df)
    print(report)

    convergence = ConvergenceSweep(output_dir="./results")
    convergence.plot_convergence(convergence.run())

    report_path = Path("./results/summary_report.txt")
    try:
        with open(report_path, 'w') as f:
            f.write(report)
        print(f"\nSummary report saved to {report_path}")
    except Exception as e:
        print(f"Error saving summary report: {e}")
        raise


if __name__ == "__main__":
    main()
