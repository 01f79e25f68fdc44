"""
Covariation Module - Realised covariation, bias terms, CLT statistics and feasible ratios
Every per-time quantity is stored in vech order (1,1), (2,1), (2,2), (3,1), ...
on the observation times t_0..t_N.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy import integrate

from config.constants import EPSILON_FRACTION, LIMIT_RESOLUTION
from exceptions import DegenerateDenominator, DimensionMismatch, MissingVolatility, RegimeMismatch
from indexing import vech_chi_xi, vech_size
from kernel import KernelSpec, increment_covariance
from scaling import Regime, ScalingFactors, tau_at
from simulate import GridSpec, PathBundle

logger = logging.getLogger(__name__)

# path variants each regime may normalize
COMPATIBLE_VARIANTS = {
    Regime.CASE_I: {"core", "Y", "X", "ingested"},
    Regime.PARTITION: {"core", "Y", "ingested"},
    Regime.CASE_II_BAR: {"core", "Y", "ingested"},
    Regime.CASE_II_TILDE_THEORETICAL: {"core", "X", "ingested"},
    Regime.CASE_II_TILDE_EMPIRICAL: {"core", "X", "Y", "ingested"},
}


def vech_pairs(p: int) -> List[Tuple[int, int]]:
    """1-based (k, l), l <= k, in vech order"""
    return [vech_chi_xi(i) for i in range(1, vech_size(p) + 1)]


@dataclass
class CovariationProcess:
    """
    Per-time vech vectors on t_0..t_N (or a sub-window for ratio statistics)

    Attributes:
        times: Grid times of the rows
        values: len(times) x p(p+1)/2 array
        pairs: 1-based (k, l) of each column
        regime: Scaling regime, or "feasible" for tau-free ratios
        n: Resolution
        kind: "realised", "clt", "correlation_ratio" or "relative_covolatility"
    """
    times: np.ndarray
    values: np.ndarray
    pairs: List[Tuple[int, int]]
    regime: str
    n: int
    kind: str = "realised"
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != (len(self.times), len(self.pairs)):
            raise DimensionMismatch(f"Covariation values shape {self.values.shape} does not match grid")

    def at(self, t: float) -> np.ndarray:
        """Value at the last grid time not after t"""
        idx = int(np.searchsorted(self.times, t + 1e-12, side="right")) - 1
        if idx < 0:
            raise DimensionMismatch(f"t={t} precedes the first time {self.times[0]}")
        return self.values[idx]

    def column(self, k: int, l: int) -> np.ndarray:
        if l > k:
            k, l = l, k
        return self.values[:, self.pairs.index((k, l))]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values, columns=[f"({k},{l})" for k, l in self.pairs])
        frame.insert(0, "time", self.times)
        return frame


@dataclass
class BiasTerm:
    """
    Centering R_{t,n} per vech entry, with its weights and volatility integrals

    weights: Y formula  -> [k, l, r, q] = E[Delta G^(k,r) Delta G^(l,q)] / (tau^k tau^l)
             X formula  -> [k, l, m]    = E[Delta G^(k,m) Delta G^(l,m)] / (tau^k tau^l)
    integrals: running int_0^t sigma sigma ds matching the weight layout
    """
    times: np.ndarray
    values: np.ndarray
    pairs: List[Tuple[int, int]]
    scenario: str
    n: int
    weights: np.ndarray
    integrals: np.ndarray
    weight_resolution: int

    def at(self, t: float) -> np.ndarray:
        idx = int(np.searchsorted(self.times, t + 1e-12, side="right")) - 1
        return self.values[idx]


def _check_regime(paths: PathBundle, scaling: ScalingFactors):
    if scaling.regime == Regime.CASE_I_TRIPLE:
        raise RegimeMismatch("Case I triple factors do not normalize component increments")
    if scaling.n != paths.grid.n:
        raise RegimeMismatch(f"Scaling computed at n={scaling.n}, paths sampled at n={paths.grid.n}")
    variant = paths.meta.get("variant", "ingested")
    allowed = COMPATIBLE_VARIANTS.get(scaling.regime, set())
    if variant not in allowed:
        raise RegimeMismatch(f"Regime {scaling.regime.value} does not apply to {variant} paths")


def realised_covariation(paths: PathBundle, scaling: ScalingFactors) -> CovariationProcess:
    """
    (1/n) sum_{i <= nt} (Delta_i A^(k) / tau^(k)) (Delta_i A^(l) / tau^(l)) for every vech pair

    Raises:
        RegimeMismatch: for incompatible regime, variant or resolution
    """
    _check_regime(paths, scaling)
    p = paths.p
    tau = scaling.component_values(p)
    scaled = paths.increments / tau[None, :]
    pairs = vech_pairs(p)
    products = np.stack([scaled[:, k - 1] * scaled[:, l - 1] for k, l in pairs], axis=1)
    running = np.vstack([np.zeros((1, len(pairs))), np.cumsum(products, axis=0) / paths.grid.n])
    return CovariationProcess(paths.grid.all_times, running, pairs, scaling.regime.value, paths.grid.n,
                              meta={"path": paths.meta.get("path")})


def _volatility_path(volatility, grid: GridSpec, p: int) -> np.ndarray:
    if volatility is None:
        raise MissingVolatility("Bias terms need volatility values or constants")
    if isinstance(volatility, PathBundle):
        if volatility.volatility is None:
            raise MissingVolatility("Path bundle carries no volatility path")
        return volatility.volatility
    arr = np.asarray(volatility, dtype=float)
    if arr.shape == (p, p):
        return np.broadcast_to(arr, (grid.N + 1, p, p))
    if arr.shape == (grid.N + 1, p, p):
        return arr
    raise DimensionMismatch(f"Volatility must be {p}x{p} or {(grid.N + 1, p, p)}, got {arr.shape}")


def _cell_covariance(spec: KernelSpec, a: Tuple[int, int], b: Tuple[int, int], n: int) -> float:
    ga, gb = spec.kernel(*a), spec.kernel(*b)
    if ga is None or gb is None:
        return 0.0
    return increment_covariance(ga, gb, n, 0)


def bias_weights(spec: KernelSpec, scaling: ScalingFactors, scenario: str, n: int) -> np.ndarray:
    """r(0)-weights at resolution n, normalized by the regime's factors at that n"""
    p = spec.p
    tau = (scaling if scaling.n == n else tau_at(spec, scaling, n)).component_values(p)
    if scenario == "CaseII-tilde":
        w = np.zeros((p, p, p))
        for k in range(p):
            for l in range(p):
                for m in range(p):
                    w[k, l, m] = _cell_covariance(spec, (k, m), (l, m), n) / (tau[k] * tau[l])
        return w
    w = np.zeros((p, p, p, p))
    for k in range(p):
        for l in range(p):
            for r in range(p):
                for q in range(p):
                    w[k, l, r, q] = _cell_covariance(spec, (k, r), (l, q), n) / (tau[k] * tau[l])
    return w


def bias_term(
    spec: KernelSpec,
    volatility: Union[np.ndarray, PathBundle, None],
    scaling: ScalingFactors,
    grid: GridSpec,
    scenario: str = "CaseII-bar",
    limit: bool = False,
) -> BiasTerm:
    """
    Centering term R_{t,n} on the grid

    Scenarios CaseI and CaseII-bar use
        R^(k,l) = sum_{r,m,q} E[Delta G^(k,r;m) Delta G^(l,q;m)] / (tau^k tau^l) int_0^t sigma^(r,m) sigma^(q,m) ds,
    CaseII-tilde uses
        R^(k,l) = sum_m E[Delta G^(k,m) Delta G^(l,m)] / (tau^k tau^l) int_0^t sigma^(k,m) sigma^(l,m) ds.
    Products of distinct driving measures have zero expectation and do not appear.

    Args:
        spec: Kernel grid
        volatility: p x p constants, an (N+1) x p x p path, or a PathBundle carrying one
        scaling: Scaling factors at the statistic's resolution
        grid: Observation grid
        scenario: "CaseI", "CaseII-bar" or "CaseII-tilde"
        limit: Use weights at LIMIT_RESOLUTION as a proxy for n -> infinity

    Raises:
        MissingVolatility: if no volatility is supplied
    """
    if scenario not in ("CaseI", "CaseII-bar", "CaseII-tilde"):
        raise ValueError(f"Unknown bias scenario '{scenario}'")
    if scaling.regime == Regime.CASE_I_TRIPLE:
        raise RegimeMismatch("Case I triple factors do not normalize component increments")
    p = spec.p
    sigma = _volatility_path(volatility, grid, p)
    resolution = LIMIT_RESOLUTION if limit else grid.n
    weights = bias_weights(spec, scaling, scenario, resolution)
    dt = grid.dt
    pairs = vech_pairs(p)

    if scenario == "CaseII-tilde":
        # sigma^(k,m) sigma^(l,m) for every (k, l, m)
        products = sigma[:, :, None, :] * sigma[:, None, :, :]
        integrals = integrate.cumulative_trapezoid(products, dx=dt, axis=0, initial=0.0)
        full = np.einsum("klm,tklm->tkl", weights, integrals)
    else:
        # (sigma sigma^T)_{rq} = sum_m sigma^(r,m) sigma^(q,m)
        products = np.einsum("trm,tqm->trq", sigma, sigma)
        integrals = integrate.cumulative_trapezoid(products, dx=dt, axis=0, initial=0.0)
        full = np.einsum("klrq,trq->tkl", weights, integrals)

    values = np.stack([full[:, k - 1, l - 1] for k, l in pairs], axis=1)
    return BiasTerm(grid.all_times, values, pairs, scenario, grid.n, weights, integrals, resolution)


def clt_statistic(cov: CovariationProcess, bias: BiasTerm) -> CovariationProcess:
    """sqrt(n) (cov_t - bias_t) per vech entry"""
    if cov.kind != "realised":
        raise RegimeMismatch(f"CLT centering applies to realised covariation, got {cov.kind}")
    if cov.n != bias.n or cov.values.shape != bias.values.shape or cov.pairs != bias.pairs:
        raise RegimeMismatch("Covariation and bias live on different grids")
    stat = np.sqrt(cov.n) * (cov.values - bias.values)
    return CovariationProcess(cov.times, stat, list(cov.pairs), cov.regime, cov.n, kind="clt", meta=dict(cov.meta))


def _running_sums(paths: PathBundle) -> Tuple[np.ndarray, List[Tuple[int, int]]]:
    inc = paths.increments
    pairs = vech_pairs(paths.p)
    products = np.stack([inc[:, k - 1] * inc[:, l - 1] for k, l in pairs], axis=1)
    return np.vstack([np.zeros((1, len(pairs))), np.cumsum(products, axis=0)]), pairs


def correlation_ratio(paths: PathBundle, epsilon: Optional[float] = None) -> CovariationProcess:
    """
    sum Delta A^(k) Delta A^(l) / sqrt(sum (Delta A^(k))^2 sum (Delta A^(l))^2) on [epsilon, T]

    Needs no scaling factors. Diagonal entries are exactly 1 and all values lie in [-1, 1].

    Raises:
        DegenerateDenominator: if a realized sum of squares vanishes on the window
    """
    grid = paths.grid
    eps = EPSILON_FRACTION * grid.T if epsilon is None else float(epsilon)
    if eps <= 0.0:
        raise ValueError(f"epsilon must be positive, got {eps}")
    sums, pairs = _running_sums(paths)
    times = grid.all_times
    window = times >= eps - 1e-12
    sums = sums[window]
    diag = {k: sums[:, pairs.index((k, k))] for k in range(1, paths.p + 1)}
    for k, col in diag.items():
        if np.any(col <= 0.0):
            raise DegenerateDenominator(f"Component {k} has zero realized variation before t={times[window][0]:.6g}")
    values = np.empty_like(sums)
    for c, (k, l) in enumerate(pairs):
        if k == l:
            values[:, c] = 1.0
        else:
            values[:, c] = np.clip(sums[:, c] / (np.sqrt(diag[k]) * np.sqrt(diag[l])), -1.0, 1.0)
    return CovariationProcess(times[window], values, pairs, "feasible", grid.n, kind="correlation_ratio",
                              meta={"epsilon": eps, "path": paths.meta.get("path")})


def relative_covolatility(paths: PathBundle, T: Optional[float] = None) -> CovariationProcess:
    """
    sum_{i <= nt} Delta A^(k) Delta A^(l) / sum_{i <= nT} Delta A^(k) Delta A^(l) on t_0..T

    Exactly 1 at t = T.

    Raises:
        DegenerateDenominator: if a terminal sum is zero
    """
    grid = paths.grid
    horizon = grid.T if T is None else float(T)
    last = int(np.floor(grid.n * horizon + 1e-9))
    if not 1 <= last <= grid.N:
        raise ValueError(f"T={horizon} outside the sampled grid")
    sums, pairs = _running_sums(paths)
    sums = sums[: last + 1]
    terminal = sums[-1]
    if np.any(terminal == 0.0):
        bad = [pairs[c] for c in np.flatnonzero(terminal == 0.0)]
        raise DegenerateDenominator(f"Terminal covariation is zero for pairs {bad}")
    values = sums / terminal[None, :]
    return CovariationProcess(grid.all_times[: last + 1], values, pairs, "feasible", grid.n,
                              kind="relative_covolatility", meta={"T": horizon, "path": paths.meta.get("path")})
