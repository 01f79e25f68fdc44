"""
Simulate Module - Gaussian core and Brownian semistationary path generation
Exact simulation of the Gaussian core by Cholesky factorization of its block-Toeplitz
increment covariance, and simulation of the Y (matrix-product) and X (elementwise)
variants with pluggable volatility and drift
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg, signal, special

from config.constants import (
    DEFAULT_SUBSTEPS,
    JITTER_FACTOR,
    JITTER_MAX,
    JITTER_START,
    SIZE_CAP,
    WARMUP_FACTOR,
)
from exceptions import DimensionMismatch, InvalidModel, NotPSD, SizeCap
from kernel import CoreFamily, GammaKernel, KernelSpec, core_family, family_profile
from utils.rng import STREAM_BROWNIAN, STREAM_DRIFT, STREAM_PREESTIMATE, STREAM_VOLATILITY, substream

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Grid and path containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """
    Observation grid t_i = i/n, i = 0..N, N = floor(nT)

    Attributes:
        T: Horizon
        n: Steps per unit time
        warmup: Length of the simulated past before t = 0; 0 selects the default 40/lambda_min
    """
    T: float
    n: int
    warmup: float = 0.0

    def __post_init__(self):
        if not self.T > 0.0:
            raise InvalidModel(f"Horizon must be positive, got T={self.T}")
        if self.n < 1:
            raise InvalidModel(f"Resolution must be at least 1, got n={self.n}")
        if self.warmup < 0.0:
            raise InvalidModel(f"Warmup must be non-negative, got {self.warmup}")
        if self.N < 1:
            raise InvalidModel(f"Grid holds no increments (n={self.n}, T={self.T})")

    @property
    def N(self) -> int:
        return int(math.floor(self.n * self.T + 1e-9))

    @property
    def dt(self) -> float:
        return 1.0 / self.n

    @property
    def times(self) -> np.ndarray:
        """Observation times t_1..t_N"""
        return np.arange(1, self.N + 1) / self.n

    @property
    def all_times(self) -> np.ndarray:
        """Observation times t_0..t_N"""
        return np.arange(self.N + 1) / self.n

    def to_dict(self) -> Dict[str, Any]:
        return {"T": self.T, "n": self.n, "N": self.N, "warmup": self.warmup}


@dataclass
class PathBundle:
    """
    One path of a p-dimensional process on a grid

    values holds levels at t_1..t_N (or increments when is_increments is set);
    origin is the level at t_0 and volatility the p x p volatility matrix on t_0..t_N.
    """
    grid: GridSpec
    values: np.ndarray
    labels: List[str]
    meta: Dict[str, Any] = field(default_factory=dict)
    origin: Optional[np.ndarray] = None
    volatility: Optional[np.ndarray] = None
    is_increments: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] != self.grid.N:
            raise DimensionMismatch(
                f"Path values must be {self.grid.N} x p, got shape {self.values.shape}")
        if len(self.labels) != self.values.shape[1]:
            raise DimensionMismatch(f"{len(self.labels)} labels for {self.values.shape[1]} columns")
        if not np.all(np.isfinite(self.values)):
            raise InvalidModel("Path values must be finite")
        if self.origin is None:
            self.origin = np.zeros(self.values.shape[1])
        if self.volatility is not None:
            p = self.p
            if self.volatility.shape != (self.grid.N + 1, p, p):
                raise DimensionMismatch(
                    f"Volatility path must have shape {(self.grid.N + 1, p, p)}, got {self.volatility.shape}")

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def increments(self) -> np.ndarray:
        """N x p increments Delta_i = A(t_i) - A(t_{i-1})"""
        if self.is_increments:
            return self.values
        return np.diff(np.vstack([self.origin[None, :], self.values]), axis=0)

    @property
    def levels(self) -> np.ndarray:
        if self.is_increments:
            return self.origin[None, :] + np.cumsum(self.values, axis=0)
        return self.values

    def scaled(self, factors: Sequence[float]) -> "PathBundle":
        """Componentwise rescaled copy"""
        c = np.asarray(factors, dtype=float)
        vol = None if self.volatility is None else self.volatility * c[None, :, None]
        return PathBundle(self.grid, self.values * c[None, :], list(self.labels), dict(self.meta),
                          self.origin * c, vol, self.is_increments)


# ---------------------------------------------------------------------------
# Volatility and drift models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantVolatility:
    value: float
    kind: str = field(default="constant", init=False)

    def __post_init__(self):
        if not (math.isfinite(self.value) and self.value > 0.0):
            raise InvalidModel(f"Constant volatility must be positive, got {self.value}")

    @property
    def is_constant(self) -> bool:
        return True

    def sample(self, times: np.ndarray, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        return np.full(len(times), self.value)

    def second_moment(self) -> Tuple[float, float]:
        return self.value ** 2, 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True)
class SinusoidVolatility:
    """sigma(t) = level + amplitude sin(2 pi frequency t), kept positive by level > |amplitude|"""
    level: float
    amplitude: float
    frequency: float
    kind: str = field(default="sinusoid", init=False)

    def __post_init__(self):
        if not self.level > abs(self.amplitude):
            raise InvalidModel(f"Sinusoid volatility needs level > |amplitude|, got {self.level}, {self.amplitude}")

    @property
    def is_constant(self) -> bool:
        return False

    def sample(self, times: np.ndarray, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        return self.level + self.amplitude * np.sin(2.0 * np.pi * self.frequency * np.asarray(times))

    def second_moment(self) -> Tuple[float, float]:
        # time average over a period
        return self.level ** 2 + 0.5 * self.amplitude ** 2, 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "level": self.level, "amplitude": self.amplitude, "frequency": self.frequency}


@dataclass(frozen=True)
class SmoothStochasticVolatility:
    """
    sigma_t = level * exp(vol_of_vol * A_t)

    A solves dA = (-kappa A + Z) dt for a stationary Ornstein-Uhlenbeck driver Z with
    mean-reversion theta and unit variance, so its paths are continuously differentiable.
    alpha is the Hoelder exponent advertised to the limit theory.
    """
    level: float
    vol_of_vol: float
    kappa: float
    theta: float
    alpha: float = 0.75
    kind: str = field(default="smooth_stochastic", init=False)

    def __post_init__(self):
        if self.level <= 0.0 or self.kappa <= 0.0 or self.theta <= 0.0 or self.vol_of_vol < 0.0:
            raise InvalidModel("Smooth stochastic volatility needs level, kappa, theta > 0 and vol_of_vol >= 0")
        if not 0.5 < self.alpha < 1.0:
            raise InvalidModel(f"Hoelder exponent must lie in (1/2, 1), got {self.alpha}")

    @property
    def is_constant(self) -> bool:
        return False

    @property
    def stationary_variance(self) -> float:
        return 1.0 / (self.kappa * (self.kappa + self.theta))

    def sample(self, times: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        size = len(times)
        step = float(times[1] - times[0]) if size > 1 else 1.0
        phi = math.exp(-self.theta * step)
        scale = math.sqrt(1.0 - phi * phi)
        eps = rng.standard_normal(size)
        driver, _ = signal.lfilter([scale], [1.0, -phi], eps, zi=[(1.0 - scale) * eps[0]])
        decay = math.exp(-self.kappa * step)
        start = math.sqrt(self.stationary_variance) * rng.standard_normal()
        a, _ = signal.lfilter([0.0, (1.0 - decay) / self.kappa], [1.0, -decay], driver, zi=[start])
        return self.level * np.exp(self.vol_of_vol * a)

    def second_moment(self, paths: int = 400, seed: int = 0) -> Tuple[float, float]:
        """Monte Carlo pre-estimate of E[sigma^2] with its standard error"""
        horizon = 20.0 / min(self.kappa, self.theta)
        times = np.linspace(0.0, horizon, 2001)
        draws = np.array([self.sample(times, substream(seed, i, STREAM_PREESTIMATE))[-1] ** 2 for i in range(paths)])
        return float(draws.mean()), float(draws.std(ddof=1) / math.sqrt(paths))

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "level": self.level, "vol_of_vol": self.vol_of_vol,
                "kappa": self.kappa, "theta": self.theta, "alpha": self.alpha}


VolatilityModel = Union[ConstantVolatility, SinusoidVolatility, SmoothStochasticVolatility]
VolatilityGrid = Tuple[Tuple[Optional[VolatilityModel], ...], ...]


def volatility_from_dict(data: Optional[Dict[str, Any]]) -> Optional[VolatilityModel]:
    if data is None:
        return None
    kind = data.get("kind")
    try:
        if kind == "constant":
            return ConstantVolatility(float(data["value"]))
        if kind == "sinusoid":
            return SinusoidVolatility(float(data["level"]), float(data["amplitude"]), float(data["frequency"]))
        if kind == "smooth_stochastic":
            return SmoothStochasticVolatility(
                float(data["level"]), float(data["vol_of_vol"]), float(data["kappa"]),
                float(data["theta"]), float(data.get("alpha", 0.75)))
    except KeyError as e:
        raise InvalidModel(f"Volatility '{kind}' missing key {e}") from e
    raise InvalidModel(f"Unknown volatility kind '{kind}'")


def volatility_grid(cells: Sequence[Sequence[Optional[VolatilityModel]]], p: int) -> VolatilityGrid:
    """Validate a p x p volatility grid; None cells are identically zero"""
    grid = tuple(tuple(row) for row in cells)
    if len(grid) != p or any(len(row) != p for row in grid):
        raise InvalidModel(f"Volatility grid must be {p}x{p}")
    return grid


def constant_volatility(values: Union[float, Sequence[Sequence[float]]], p: int, diagonal: bool = False) -> VolatilityGrid:
    """Constant volatility grid from a scalar or a p x p array; zeros become None cells"""
    arr = np.broadcast_to(np.asarray(values, dtype=float), (p, p))
    return tuple(
        tuple(ConstantVolatility(float(arr[i, j])) if arr[i, j] != 0.0 and (not diagonal or i == j) else None
              for j in range(p))
        for i in range(p))


def volatility_moments(grid: VolatilityGrid) -> np.ndarray:
    """p x p matrix of E[(sigma^(k,m))^2]; zero for absent cells"""
    p = len(grid)
    out = np.zeros((p, p))
    for i in range(p):
        for j in range(p):
            if grid[i][j] is not None:
                out[i, j] = grid[i][j].second_moment()[0]
    return out


@dataclass(frozen=True)
class ZeroDrift:
    kind: str = field(default="zero", init=False)

    def sample(self, grid: GridSpec, substeps: int, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        return np.zeros(grid.N + 1)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind}


@dataclass(frozen=True)
class SmoothIntegratedDrift:
    """U_t = scale * int_0^t mu_s ds for a stationary OU process mu with unit variance"""
    scale: float
    theta: float = 1.0
    kind: str = field(default="smooth_integrated", init=False)

    def __post_init__(self):
        if self.theta <= 0.0:
            raise InvalidModel(f"Drift mean reversion must be positive, got {self.theta}")

    def sample(self, grid: GridSpec, substeps: int, rng: np.random.Generator) -> np.ndarray:
        fine = grid.N * substeps
        step = grid.dt / substeps
        phi = math.exp(-self.theta * step)
        s = math.sqrt(1.0 - phi * phi)
        eps = rng.standard_normal(fine)
        mu, _ = signal.lfilter([s], [1.0, -phi], eps, zi=[(1.0 - s) * eps[0]])
        u = np.concatenate([[0.0], np.cumsum(mu) * step * self.scale])
        return u[::substeps]

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "scale": self.scale, "theta": self.theta}


DriftModel = Union[ZeroDrift, SmoothIntegratedDrift]


def drift_from_dict(data: Optional[Dict[str, Any]]) -> DriftModel:
    if data is None or data.get("kind", "zero") == "zero":
        return ZeroDrift()
    if data["kind"] == "smooth_integrated":
        return SmoothIntegratedDrift(float(data.get("scale", 1.0)), float(data.get("theta", 1.0)))
    raise InvalidModel(f"Unknown drift kind '{data['kind']}'")


# ---------------------------------------------------------------------------
# Gaussian core
# ---------------------------------------------------------------------------

def cholesky_with_jitter(matrix: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, adding a growing ridge if factorization fails"""
    try:
        return linalg.cholesky(matrix, lower=True)
    except linalg.LinAlgError:
        pass
    size = matrix.shape[0]
    base = np.trace(matrix) / size
    jitter = JITTER_START
    while jitter <= JITTER_MAX * (1.0 + 1e-9):
        logger.warning("Cholesky failed, adding ridge %.1e x mean diagonal", jitter)
        try:
            return linalg.cholesky(matrix + jitter * base * np.eye(size), lower=True)
        except linalg.LinAlgError:
            jitter *= JITTER_FACTOR
    raise NotPSD(f"Covariance of size {size} not factorizable after jitter up to {JITTER_MAX:g}")


@dataclass
class CoreCovariance:
    """
    Covariance of the stacked increment vector of a core family

    Rows are member-major over the active (non-zero) members: index a * N + i.
    """
    family: CoreFamily
    grid: GridSpec
    active: Tuple[int, ...]
    profile: np.ndarray
    matrix: np.ndarray
    _factor: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def factor(self) -> np.ndarray:
        if self._factor is None:
            self._factor = cholesky_with_jitter(self.matrix)
        return self._factor

    def sample_increments(self, rng: np.random.Generator) -> np.ndarray:
        """members x N increment draw; inactive members are zero"""
        n_steps = self.grid.N
        z = rng.standard_normal(self.matrix.shape[0])
        draw = (self.factor @ z).reshape(len(self.active), n_steps)
        out = np.zeros((self.family.size, n_steps))
        out[list(self.active)] = draw
        return out


def build_core_covariance(spec: KernelSpec, grid: GridSpec, target: str = "component",
                          method: str = "auto", size_cap: int = SIZE_CAP) -> CoreCovariance:
    """
    Covariance matrix of the stacked Gaussian-core increments on the grid

    Block (a, b) is Toeplitz: Cov(Delta_i G^a, Delta_j G^b) depends on j - i only,
    so only N lags per member pair are evaluated.

    Args:
        spec: Kernel grid
        grid: Observation grid
        target: "component", "triple", "pair" or "kernel" family
        method: Increment profile method
        size_cap: Largest admissible matrix dimension

    Returns:
        CoreCovariance
    """
    family = core_family(spec, target)
    active = tuple(a for a, terms in enumerate(family.summands) if terms)
    n_steps = grid.N
    size = len(active) * n_steps
    if size > size_cap:
        raise SizeCap(f"Stacked covariance of size {size} exceeds cap {size_cap}")
    logger.debug("Building %s core covariance: %d members x %d steps", target, len(active), n_steps)
    profile = family_profile(family, grid.n, n_steps - 1, method=method)
    matrix = np.empty((size, size))
    for x, a in enumerate(active):
        for y, b in enumerate(active):
            block = linalg.toeplitz(profile[b, a], profile[a, b])
            matrix[x * n_steps:(x + 1) * n_steps, y * n_steps:(y + 1) * n_steps] = block
    matrix = 0.5 * (matrix + matrix.T)
    return CoreCovariance(family, grid, active, profile, matrix)


def _run_paths(fn: Callable[[int], PathBundle], M: int, threads: int) -> List[PathBundle]:
    if threads > 1 and M > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(M)))
    return [fn(i) for i in range(M)]


def _label(target: str, label: Tuple[int, ...]) -> str:
    return "G(" + ",".join(str(v) for v in label) + ")"


def simulate_gaussian_core(cov: CoreCovariance, M: int, seed: int, threads: int = 1) -> List[PathBundle]:
    """
    Exact Gaussian-core paths; path i depends only on (seed, i)

    Levels start at 0 and are cumulative sums of the sampled increments.
    """
    if M < 0:
        raise InvalidModel(f"Path count must be non-negative, got {M}")
    labels = [_label(cov.family.target, lab) for lab in cov.family.labels]
    cov.factor  # factorize once before workers share it

    def one(path: int) -> PathBundle:
        inc = cov.sample_increments(substream(seed, path, STREAM_BROWNIAN))
        meta = {"seed": seed, "path": path, "variant": "core", "target": cov.family.target}
        return PathBundle(cov.grid, np.cumsum(inc.T, axis=0), labels, meta)

    return _run_paths(one, M, threads)


# ---------------------------------------------------------------------------
# Brownian semistationary processes
# ---------------------------------------------------------------------------

def _all_constant(volatility: VolatilityGrid) -> bool:
    return all(cell is None or cell.is_constant for row in volatility for cell in row)


def _cell_values(volatility: VolatilityGrid) -> np.ndarray:
    p = len(volatility)
    out = np.zeros((p, p))
    for i in range(p):
        for j in range(p):
            if volatility[i][j] is not None:
                out[i, j] = volatility[i][j].value
    return out


def _combine_exact(increments: np.ndarray, sigma: np.ndarray, variant: str) -> np.ndarray:
    """
    increments[k, r, m] holds Delta G^(k,r;m) over the grid; returns N x p increments

    Y^(k) = sum_{r,m} sigma^(r,m) G^(k,r;m),  X^(k) = sum_m sigma^(k,m) G^(k,m;m)
    """
    p = sigma.shape[0]
    n_steps = increments.shape[-1]
    out = np.zeros((n_steps, p))
    for k in range(p):
        acc = np.zeros(n_steps)
        if variant == "Y":
            for r in range(p):
                for m in range(p):
                    if sigma[r, m] != 0.0:
                        acc = acc + sigma[r, m] * increments[k, r, m]
        else:
            for m in range(p):
                if sigma[k, m] != 0.0:
                    acc = acc + sigma[k, m] * increments[k, m, m]
        out[:, k] = acc
    return out


def _power_moment(delta: float, lam: float, step: float) -> float:
    """int_0^step u^delta e^{-lam u} du"""
    a = delta + 1.0
    return float(special.gamma(a) * special.gammainc(a, lam * step) / lam ** a)


def _far_weights(kernel: GammaKernel, step: float, count: int) -> np.ndarray:
    """
    Weight of fine cell ((j-1) step, j step] for j = 2..count-1; entries 0 and 1 are zero

    The power part is integrated over the cell and the exponential is evaluated
    where the power function takes its cell mean.
    """
    d, lam = kernel.delta, kernel.lam
    j = np.arange(2, count, dtype=float)
    mean_power = step ** d * (j ** (d + 1.0) - (j - 1.0) ** (d + 1.0)) / (d + 1.0)
    point = (j - 0.5) * step if abs(d) < 1e-6 else mean_power ** (1.0 / d)
    out = np.zeros(count)
    out[2:] = mean_power * np.exp(-lam * point)
    return out


@dataclass(frozen=True)
class NearCellLaw:
    """
    Joint law of (dW, int_cell g_a(t - s) dW_s) over the most recent fine cell

    The integrals for kernels a = cells[i] are beta * dW + root @ Z with Z standard normal.
    """
    cells: Tuple[Tuple[int, int], ...]
    beta: np.ndarray
    root: np.ndarray

    @classmethod
    def build(cls, spec: KernelSpec, step: float) -> "NearCellLaw":
        cells = tuple((k, r) for k in range(spec.p) for r in range(spec.p) if spec.kernel(k, r) is not None)
        kernels = [spec.kernel(k, r) for k, r in cells]
        mu = np.array([_power_moment(g.delta, g.lam, step) for g in kernels])
        second = np.array([[_power_moment(a.delta + b.delta, a.lam + b.lam, step) for b in kernels]
                           for a in kernels])
        residual = second - np.outer(mu, mu) / step
        w, v = linalg.eigh(residual)
        root = v * np.sqrt(np.clip(w, 0.0, None))
        return cls(cells, mu / step, root)

    def sample(self, dw: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal((len(self.cells), dw.shape[0]))
        return self.beta[:, None] * dw[None, :] + self.root @ z


def _riemann_increments(spec: KernelSpec, volatility: VolatilityGrid, grid: GridSpec, variant: str,
                        warmup: float, substeps: int, seed: int, path: int,
                        near: Optional[NearCellLaw] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Hybrid convolution over [-warmup, T]; returns (levels t_1..t_N, origin, sigma on t_0..t_N)

    The most recent fine cell is integrated exactly against the Brownian motion;
    older cells use cell-averaged kernel weights. Volatility is frozen at the left
    end of every fine cell.
    """
    p = spec.p
    step = grid.dt / substeps
    lead = int(math.ceil(warmup / step - 1e-9))
    length = lead + grid.N * substeps
    t_fine = (np.arange(length + 1) - lead) * step
    obs = lead + np.arange(grid.N + 1) * substeps
    if near is None:
        near = NearCellLaw.build(spec, step)

    dw = np.stack([substream(seed, path, STREAM_BROWNIAN, m).standard_normal(length) * math.sqrt(step)
                   for m in range(p)])
    # near[m][c]: exact integral of kernel near.cells[c] against dW^(m) over each fine cell
    near_draws = [near.sample(dw[m], substream(seed, path, STREAM_BROWNIAN, m, 1)) for m in range(p)]
    sigma = np.zeros((p, p, length + 1))
    for i in range(p):
        for j in range(p):
            cell = volatility[i][j]
            if cell is not None:
                sigma[i, j] = cell.sample(t_fine, substream(seed, path, STREAM_VOLATILITY, i, j))

    weights = {(k, r): _far_weights(spec.kernel(k, r), step, length + 1) for k, r in near.cells}
    slot = {cell: c for c, cell in enumerate(near.cells)}

    def shifted(x: np.ndarray) -> np.ndarray:
        # the cell ending at fine index t contributes to level t
        return np.concatenate([[0.0], x])

    levels = np.zeros((length + 1, p))
    if variant == "Y":
        xi = np.zeros((p, length))
        for r in range(p):
            for m in range(p):
                if volatility[r][m] is not None:
                    xi[r] = xi[r] + sigma[r, m, :length] * dw[m]
        for k, r in near.cells:
            levels[:, k] += signal.fftconvolve(weights[(k, r)], xi[r])[:length + 1]
            for m in range(p):
                if volatility[r][m] is not None:
                    levels[:, k] += shifted(sigma[r, m, :length] * near_draws[m][slot[(k, r)]])
    else:
        for k, m in near.cells:
            if volatility[k][m] is not None:
                levels[:, k] += signal.fftconvolve(weights[(k, m)], sigma[k, m, :length] * dw[m])[:length + 1]
                levels[:, k] += shifted(sigma[k, m, :length] * near_draws[m][slot[(k, m)]])

    observed = levels[obs]
    return observed[1:], observed[0], np.moveaxis(sigma[:, :, obs], -1, 0)


def simulate_bss(
    spec: KernelSpec,
    volatility: VolatilityGrid,
    drift: Sequence[DriftModel],
    grid: GridSpec,
    variant: str = "Y",
    M: int = 1,
    seed: int = 0,
    scheme: str = "auto",
    substeps: int = DEFAULT_SUBSTEPS,
    threads: int = 1,
    method: str = "auto",
) -> List[PathBundle]:
    """
    Simulate M paths of the Y or X variant

    With constant volatility the exact route samples the p^2 kernel processes
    int g^(k,r)(t-s) dW^(m)_s jointly from the Gaussian core for every m and combines
    them with the volatility constants, so Y and X share noise. Otherwise a hybrid
    Riemann sum with substeps per observation step runs over [-warmup, T], with
    the most recent fine cell integrated exactly.

    Args:
        spec: Kernel grid
        volatility: p x p volatility models (None cells are zero)
        drift: One drift model per component
        grid: Observation grid; warmup 0 selects 40 / lambda_min
        variant: "Y" or "X"
        M: Number of paths
        seed: Experiment seed
        scheme: "auto", "exact" or "riemann"
        substeps: Fine steps per observation step (Riemann route)
        threads: Worker threads across paths
        method: Increment profile method (exact route)

    Returns:
        List of PathBundle with the volatility path attached
    """
    p = spec.p
    volatility = volatility_grid(volatility, p)
    if variant not in ("Y", "X"):
        raise InvalidModel(f"Variant must be 'Y' or 'X', got '{variant}'")
    if len(drift) != p:
        raise InvalidModel(f"Need one drift model per component, got {len(drift)}")
    if substeps < 1:
        raise InvalidModel(f"Substeps must be at least 1, got {substeps}")
    if M < 0:
        raise InvalidModel(f"Path count must be non-negative, got {M}")
    if scheme not in ("auto", "exact", "riemann"):
        raise InvalidModel(f"Unknown simulation scheme '{scheme}'")

    warmup = grid.warmup if grid.warmup > 0.0 else WARMUP_FACTOR / spec.min_lambda
    constant = _all_constant(volatility)
    if scheme == "exact" and not constant:
        raise InvalidModel("Exact simulation requires constant volatility")
    use_exact = scheme == "exact" or (scheme == "auto" and constant and p * p * grid.N <= SIZE_CAP)

    labels = [f"{variant}({k + 1})" for k in range(p)]
    base_meta = {
        "seed": seed, "variant": variant, "scheme": "exact" if use_exact else "riemann",
        "warmup": None if use_exact else warmup, "substeps": None if use_exact else substeps,
        "volatility": [[None if c is None else c.to_dict() for c in row] for row in volatility],
        "drift": [d.to_dict() for d in drift],
    }

    cov = None
    sigma_const = None
    near = None
    if use_exact:
        cov = build_core_covariance(spec, grid, target="kernel", method=method)
        cov.factor
        sigma_const = _cell_values(volatility)
    else:
        near = NearCellLaw.build(spec, grid.dt / substeps)
    logger.info("Simulating %d %s paths (%s scheme, p=%d, N=%d)", M, variant, base_meta["scheme"], p, grid.N)

    def one(path: int) -> PathBundle:
        if use_exact:
            inc = np.zeros((p, p, p, grid.N))
            for m in range(p):
                draw = cov.sample_increments(substream(seed, path, STREAM_BROWNIAN, m))
                inc[:, :, m, :] = draw.reshape(p, p, grid.N)
            levels = np.cumsum(_combine_exact(inc, sigma_const, variant), axis=0)
            origin = np.zeros(p)
            sigma_path = np.broadcast_to(sigma_const, (grid.N + 1, p, p)).copy()
        else:
            levels, origin, sigma_path = _riemann_increments(
                spec, volatility, grid, variant, warmup, substeps, seed, path, near)
        for k, model in enumerate(drift):
            if model.kind != "zero":
                u = model.sample(grid, substeps, substream(seed, path, STREAM_DRIFT, k))
                levels[:, k] += u[1:] - u[0]
        meta = dict(base_meta, path=path)
        return PathBundle(grid, levels, labels, meta, origin=origin, volatility=sigma_path)

    return _run_paths(one, M, threads)
