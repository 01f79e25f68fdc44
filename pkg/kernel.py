"""
Kernel Module - Gamma kernels, cross-moments and increment correlations
Evaluates g(t) = t^delta e^(-lambda t), the autocovariances of the Gaussian core,
normalized increment correlations at resolution n, their small-scale limits,
the confluent-hypergeometric series for the numerator and the assumption diagnostics
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special

from config.constants import (
    CORRELATION_TOL,
    CROSS_CHECK_RTOL,
    DELTA_LOWER,
    DELTA_UPPER,
    MIN_AUDIT_LAGS,
    QUAD_RTOL,
    SERIES_CANCELLATION_LIMIT,
    SERIES_MAX_TERMS,
    SERIES_POLE_GAP,
    SERIES_RTOL,
)
from exceptions import (
    DegenerateVariance,
    DomainError,
    InsufficientLags,
    InvalidModel,
    NonConvergent,
    SeriesDiverged,
)
from utils.quadrature import integrate_panels, tail_cutoff

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GammaKernel:
    """
    Gamma kernel g(t) = t^delta * exp(-lam * t) for t > 0, zero otherwise

    Attributes:
        delta: Power exponent, > -1/2 for square integrability
        lam: Exponential decay rate, > 0
    """
    delta: float
    lam: float

    def __post_init__(self):
        if not (math.isfinite(self.delta) and math.isfinite(self.lam)):
            raise InvalidModel(f"Kernel parameters must be finite, got delta={self.delta}, lambda={self.lam}")
        if self.lam <= 0.0:
            raise InvalidModel(f"Kernel decay rate must be positive, got lambda={self.lam}")
        if self.delta <= -0.5:
            raise InvalidModel(f"Kernel exponent must exceed -1/2, got delta={self.delta}")

    def __call__(self, t):
        return gamma_eval(self, t)

    def scalar(self, t: float) -> float:
        """Fast scalar evaluation used inside quadrature integrands"""
        if t <= 0.0:
            return 0.0
        return t ** self.delta * math.exp(-self.lam * t)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GammaKernel":
        try:
            return cls(delta=float(data["delta"]), lam=float(data["lambda"]))
        except KeyError as e:
            raise InvalidModel(f"Kernel entry missing key {e}") from e

    def to_dict(self) -> Dict[str, float]:
        return {"delta": self.delta, "lambda": self.lam}


def gamma_eval(kernel: GammaKernel, t):
    """Evaluate the gamma kernel; exactly 0 for t <= 0. Accepts scalars or arrays."""
    arr = np.asarray(t, dtype=float)
    out = np.zeros_like(arr)
    pos = arr > 0.0
    tp = arr[pos]
    out[pos] = tp ** kernel.delta * np.exp(-kernel.lam * tp)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class KernelSpec:
    """
    p x p grid of gamma kernels g^(i,j); a None cell is the zero kernel

    Row i lists the kernels feeding component i, column j the driving measure.
    Indices are 0-based in the Python API.
    """
    p: int
    kernels: Tuple[Tuple[Optional[GammaKernel], ...], ...]

    def __post_init__(self):
        if self.p < 1:
            raise InvalidModel(f"Dimension must be positive, got p={self.p}")
        rows = tuple(tuple(row) for row in self.kernels)
        if len(rows) != self.p or any(len(row) != self.p for row in rows):
            raise InvalidModel(f"Kernel grid must be exactly {self.p}x{self.p}")
        for row in rows:
            for cell in row:
                if cell is not None and not isinstance(cell, GammaKernel):
                    raise InvalidModel(f"Kernel cells must be GammaKernel or None, got {type(cell).__name__}")
        if all(cell is None for row in rows for cell in row):
            raise InvalidModel("Kernel grid has no non-zero kernel")
        object.__setattr__(self, "kernels", rows)

    def kernel(self, i: int, j: int) -> Optional[GammaKernel]:
        return self.kernels[i][j]

    @property
    def min_lambda(self) -> float:
        return min(cell.lam for row in self.kernels for cell in row if cell is not None)

    @property
    def deltas(self) -> List[float]:
        return [cell.delta for row in self.kernels for cell in row if cell is not None]

    @classmethod
    def uniform(cls, p: int, delta: float, lam: float, diagonal: bool = False) -> "KernelSpec":
        """Identical kernels everywhere, or only on the diagonal"""
        k = GammaKernel(delta, lam)
        return cls(p, tuple(
            tuple(k if (not diagonal or i == j) else None for j in range(p)) for i in range(p)
        ))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "KernelSpec":
        """Parse {"p": p, "kernels": [[{"delta": .., "lambda": ..} | null, ...], ...]}"""
        try:
            p = int(data["p"])
            grid = data["kernels"]
        except KeyError as e:
            raise InvalidModel(f"Kernel spec missing key {e}") from e
        return cls(p, tuple(
            tuple(None if cell is None else GammaKernel.from_dict(cell) for cell in row) for row in grid
        ))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "p": self.p,
            "kernels": [[None if c is None else c.to_dict() for c in row] for row in self.kernels],
        }


# ---------------------------------------------------------------------------
# Cross-moments
# ---------------------------------------------------------------------------

def cross_moment(ki: GammaKernel, kj: GammaKernel, h: float, rtol: float = QUAD_RTOL) -> float:
    """
    Adaptive-quadrature value of  int_0^inf ki(x + h) kj(x) dx

    Args:
        ki: Kernel evaluated at the shifted argument
        kj: Kernel evaluated at x
        h: Non-negative lag
        rtol: Relative tolerance

    Returns:
        The integral
    """
    if h < 0.0:
        raise DomainError(f"Lag must be non-negative, got h={h}")

    def f(x: float) -> float:
        return ki.scalar(x + h) * kj.scalar(x)

    s0 = kj.delta + (ki.delta if h == 0.0 else 0.0)
    cuts = sorted({c for c in (h, 1.0) if c > 0.0})
    x_max = tail_cutoff(ki.lam + kj.lam, cuts[-1], growth=max(ki.delta + kj.delta, 0.0))
    edges = [0.0] + cuts + [x_max]
    panels = [(edges[q], edges[q + 1], s0 if q == 0 else 0.0) for q in range(len(edges) - 1)]
    return integrate_panels(f, panels, rtol=rtol, label="cross_moment")


def _kummer_m(a: float, b: float, z: np.ndarray, rtol: float, max_terms: int) -> np.ndarray:
    """Confluent hypergeometric M(a, b, z) by its Pochhammer series with a geometric tail bound"""
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        return np.empty_like(z)
    term = np.ones_like(z)
    total = np.ones_like(z)
    peak = np.ones_like(z)
    for r in range(max_terms):
        term = term * (a + r) / (b + r) * z / (r + 1)
        total = total + term
        peak = np.maximum(peak, np.abs(term))
        ratio = abs((a + r + 1) / (b + r + 1)) * z / (r + 2)
        if r + 2 > np.max(z) and r > abs(b) and np.all(ratio < 1.0):
            tail = np.abs(term) * ratio / (1.0 - ratio)
            if np.all(tail <= rtol * np.abs(total)):
                if np.any(peak * np.finfo(float).eps > rtol * np.abs(total)):
                    raise SeriesDiverged(f"M({a:.4g}, {b:.4g}, z) loses precision to cancellation")
                return total
    raise SeriesDiverged(f"M({a:.4g}, {b:.4g}, z) did not meet its tail bound within {max_terms} terms")


def series_constants(ki: GammaKernel, kj: GammaKernel) -> Tuple[float, float]:
    """
    Constants K1, K2 of the expansion

        int_0^inf (x+h)^di x^dj e^{-cx} dx = K1 h^(di+dj+1) M(dj+1, di+dj+2, ch) + K2 M(-di, -di-dj, ch)

    with c = lambda_i + lambda_j, K1 = Gamma(dj+1) Gamma(-1-di-dj) / Gamma(-di) and
    K2 = Gamma(di+dj+1) / c^(di+dj+1). Gamma values go through log-Gamma with sign tracking.

    Raises:
        SeriesDiverged: when di + dj is (numerically) an integer, where K1 has a pole
    """
    di, dj = ki.delta, kj.delta
    s = di + dj
    if abs(s - round(s)) < SERIES_POLE_GAP:
        raise SeriesDiverged(f"Series constants have a pole at delta_i + delta_j = {s:.6g}")
    c = ki.lam + kj.lam
    a, b = dj + 1.0, s + 2.0
    log_k1 = special.gammaln(a) + special.gammaln(1.0 - b)
    sign_k1 = special.gammasgn(a) * special.gammasgn(1.0 - b)
    k1 = sign_k1 * math.exp(log_k1) * special.rgamma(-di)
    k2 = math.exp(special.gammaln(b - 1.0) - (b - 1.0) * math.log(c))
    return float(k1), float(k2)


def cross_moment_series(
    ki: GammaKernel,
    kj: GammaKernel,
    h,
    rtol: float = SERIES_RTOL,
    max_terms: int = SERIES_MAX_TERMS,
) -> np.ndarray:
    """
    Series evaluation of  int_0^inf ki(x + h) kj(x) dx  for an array of lags

    Raises:
        SeriesDiverged: at poles, on cancellation, or if the tail bound is not met
    """
    hs = np.atleast_1d(np.asarray(h, dtype=float))
    if np.any(hs < 0.0):
        raise DomainError("Lags must be non-negative")
    di, dj = ki.delta, kj.delta
    k1, k2 = series_constants(ki, kj)
    c = ki.lam + kj.lam
    z = c * hs
    first = k1 * np.where(hs > 0.0, hs, 0.0) ** (di + dj + 1.0) * _kummer_m(dj + 1.0, di + dj + 2.0, z, rtol, max_terms)
    second = k2 * _kummer_m(-di, -di - dj, z, rtol, max_terms)
    j = first + second
    if np.any(np.abs(first) + np.abs(second) > SERIES_CANCELLATION_LIMIT * np.abs(j)):
        raise SeriesDiverged("Series terms cancel beyond the accepted limit")
    return np.exp(-ki.lam * hs) * j


def cross_moment_closed_form(ki: GammaKernel, kj: GammaKernel, h) -> np.ndarray:
    """
    Closed form of  int_0^inf ki(x + h) kj(x) dx  for an array of lags

    Integer exponents expand binomially; otherwise Tricomi's U gives
    Gamma(dj+1) h^(di+dj+1) U(dj+1, di+dj+2, ch), with the h = 0 value Gamma(di+dj+1)/c^(di+dj+1).
    """
    hs = np.atleast_1d(np.asarray(h, dtype=float))
    di, dj = ki.delta, kj.delta
    c = ki.lam + kj.lam
    if float(di).is_integer() and di >= 0 and float(dj).is_integer():
        total = np.zeros_like(hs)
        for s in range(int(di) + 1):
            total += special.comb(int(di), s) * hs ** (int(di) - s) * math.exp(
                special.gammaln(s + dj + 1.0) - (s + dj + 1.0) * math.log(c))
        return np.exp(-ki.lam * hs) * total
    b = di + dj + 2.0
    at_zero = math.exp(special.gammaln(b - 1.0) - (b - 1.0) * math.log(c))
    positive = hs > 0.0
    j = np.full_like(hs, at_zero)
    hp = hs[positive]
    j[positive] = special.gamma(dj + 1.0) * hp ** (b - 1.0) * special.hyperu(dj + 1.0, b, c * hp)
    if not np.all(np.isfinite(j)) or np.any(j < 0.0):
        raise SeriesDiverged("Confluent closed form returned non-finite or negative values")
    return np.exp(-ki.lam * hs) * j


def core_autocovariance(spec: KernelSpec, i: int, j: int, h: float) -> float:
    """
    C_ij(h) = E[G^(i)_{t+h} G^(j)_t] = sum_l int_0^inf g^(i,l)(x + h) g^(j,l)(x) dx

    Negative lags use C_ij(h) = C_ji(-h).
    """
    if h < 0.0:
        return core_autocovariance(spec, j, i, -h)
    total = 0.0
    for l in range(spec.p):
        gi, gj = spec.kernel(i, l), spec.kernel(j, l)
        if gi is not None and gj is not None:
            total += cross_moment(gi, gj, h)
    return total


# ---------------------------------------------------------------------------
# Increment covariances
# ---------------------------------------------------------------------------

@lru_cache(maxsize=65536)
def _increment_covariance_quad(ka: GammaKernel, kb: GammaKernel, n: int, k: int) -> float:
    h = 1.0 / n
    kh, k1h = k * h, (k - 1) * h

    def f(u: float) -> float:
        return (ka.scalar(u) - ka.scalar(u - h)) * (kb.scalar(u + kh) - kb.scalar(u + k1h))

    s1 = ka.delta + (min(kb.delta, 0.0) if k <= 1 else 0.0)
    s2 = min(ka.delta, 0.0) + (min(kb.delta, 0.0) if k == 0 else 0.0)
    far = max(2.0 * h, 1.0)
    x_max = tail_cutoff(ka.lam + kb.lam, far + kh, growth=max(ka.delta + kb.delta, 0.0))
    panels = [(0.0, h, s1), (h, 2.0 * h, s2), (2.0 * h, far, 0.0), (far, x_max, 0.0)]
    return integrate_panels(f, panels, label="increment_covariance")


def increment_covariance(ka: GammaKernel, kb: GammaKernel, n: int, k: int) -> float:
    """
    E[Delta_1 G_a * Delta_{1+k} G_b] for G_a, G_b driven by the same Brownian measure

    Computed as int_0^inf (a(u) - a(u - 1/n)) (b(u + k/n) - b(u + (k-1)/n)) du, which
    avoids differencing near-equal autocovariances. Negative k swaps the roles.

    Args:
        ka: Kernel of the earlier increment
        kb: Kernel of the later increment
        n: Resolution (steps per unit time)
        k: Lag in steps

    Returns:
        The increment covariance
    """
    if n < 1:
        raise DomainError(f"Resolution must be at least 1, got n={n}")
    if k < 0:
        return _increment_covariance_quad(kb, ka, int(n), int(-k))
    return _increment_covariance_quad(ka, kb, int(n), int(k))


def _second_difference(c_vals: np.ndarray) -> np.ndarray:
    # c_vals[d + 1] = c(d/n) for d = -1..K+1
    return 2.0 * c_vals[1:-1] - c_vals[:-2] - c_vals[2:]


def increment_profile(ka: GammaKernel, kb: GammaKernel, n: int, max_lag: int, method: str = "auto") -> np.ndarray:
    """
    Increment covariances E[Delta_1 G_a Delta_{1+d} G_b] for d = 0..max_lag

    Methods:
        "quadrature": one cancellation-free integral per lag
        "series": second differences of the series cross-moment
        "closed": second differences of the confluent closed form
        "auto": series, then closed form, then quadrature; the lag-0 value is
                cross-checked against quadrature before a fast path is accepted
    """
    if method == "quadrature":
        return np.array([increment_covariance(ka, kb, n, d) for d in range(max_lag + 1)])

    # c(u) = E[G_a(0) G_b(u)]: int b(x+u) a(x) dx for u >= 0, int a(x+|u|) b(x) dx for u < 0
    lags = np.arange(-1, max_lag + 2) / n
    forward = lags >= 0.0

    def evaluate(fn) -> np.ndarray:
        c_vals = np.empty_like(lags)
        c_vals[forward] = fn(kb, ka, lags[forward])
        c_vals[~forward] = fn(ka, kb, -lags[~forward])
        return _second_difference(c_vals)

    chain = {"series": [cross_moment_series], "closed": [cross_moment_closed_form],
             "auto": [cross_moment_series, cross_moment_closed_form]}
    if method not in chain:
        raise ValueError(f"Unknown increment profile method '{method}'")

    for fn in chain[method]:
        try:
            profile = evaluate(fn)
        except SeriesDiverged as e:
            logger.debug("increment_profile: %s unavailable (%s)", fn.__name__, e)
            if method != "auto":
                raise
            continue
        if method != "auto":
            return profile
        reference = increment_covariance(ka, kb, n, 0)
        if abs(profile[0] - reference) <= 1e-6 * max(abs(reference), 1e-300):
            return profile
        logger.debug("increment_profile: %s lag-0 mismatch %.3e vs %.3e", fn.__name__, profile[0], reference)

    logger.info("increment_profile: falling back to quadrature for %d lags", max_lag + 1)
    return increment_profile(ka, kb, n, max_lag, method="quadrature")


def component_increment_covariance(spec: KernelSpec, n: int, i: int, j: int, k: int) -> float:
    """E[Delta_1 G^(i) Delta_{1+k} G^(j)] summed over the independent driving measures"""
    total = 0.0
    for l in range(spec.p):
        gi, gj = spec.kernel(i, l), spec.kernel(j, l)
        if gi is not None and gj is not None:
            total += increment_covariance(gi, gj, n, k)
    return total


def increment_correlation(spec: KernelSpec, n: int, i: int, j: int, k: int) -> float:
    """
    Case I correlation r^(n)_{i,j}(k) of normalized Gaussian-core increments

    Args:
        spec: Kernel grid
        n: Resolution
        i: Component of the earlier increment (0-based)
        j: Component of the later increment (0-based)
        k: Lag, k >= 0

    Returns:
        The correlation; exactly 1 for i == j, k == 0
    """
    if k < 0:
        raise DomainError(f"Lag must be non-negative, got k={k}")
    if i == j and k == 0:
        return 1.0
    var_i = component_increment_covariance(spec, n, i, i, 0)
    var_j = component_increment_covariance(spec, n, j, j, 0)
    if var_i <= 0.0 or var_j <= 0.0:
        raise DegenerateVariance(f"Increment variance not positive for components ({i}, {j}) at n={n}")
    return component_increment_covariance(spec, n, i, j, k) / math.sqrt(var_i * var_j)


def limiting_correlation(delta: float, k: int) -> float:
    """
    Small-scale limit of r^(n)(k) for gamma kernels sharing exponent delta

        rho(k) = ((k+1)^x - 2 k^x + (k-1)^x) / 2,   x = 2 delta + 1

    which is the fractional-Gaussian-noise correlation with Hurst index delta + 1/2.
    """
    if not (DELTA_LOWER < delta < DELTA_UPPER):
        raise DomainError(f"delta must lie in (-1/2, 1/2), got {delta}")
    if k < 0:
        raise DomainError(f"Lag must be non-negative, got k={k}")
    if k == 0:
        return 1.0
    x = 2.0 * delta + 1.0
    lower = (k - 1) ** x if k > 1 else 0.0
    return 0.5 * ((k + 1) ** x - 2.0 * k ** x + lower)


def limiting_correlations(delta: float, max_lag: int) -> np.ndarray:
    """Vectorized limiting_correlation for lags 0..max_lag"""
    if not (DELTA_LOWER < delta < DELTA_UPPER):
        raise DomainError(f"delta must lie in (-1/2, 1/2), got {delta}")
    x = 2.0 * delta + 1.0
    k = np.arange(max_lag + 1, dtype=float)
    out = 0.5 * ((k + 1.0) ** x - 2.0 * k ** x + np.abs(k - 1.0) ** x)
    out[0] = 1.0
    return out


def series_numerator(spec: KernelSpec, n: int, i: int, j: int, k: int,
                     rtol: float = SERIES_RTOL, max_terms: int = SERIES_MAX_TERMS,
                     fallback: bool = True) -> float:
    """
    Numerator of r^(n)_{i,j}(k) through the confluent series of the cross-moments

    At poles of the series constants the closed form takes over when fallback is set.

    Raises:
        SeriesDiverged: if the series fails and fallback is False
    """
    lags = np.array([k - 1, k, k + 1], dtype=float) / n
    total = 0.0
    for l in range(spec.p):
        gi, gj = spec.kernel(i, l), spec.kernel(j, l)
        if gi is None or gj is None:
            continue
        values = np.empty(3)
        forward = lags >= 0.0
        backward = ~forward
        try:
            values[forward] = cross_moment_series(gj, gi, lags[forward], rtol, max_terms)
            if backward.any():
                values[backward] = cross_moment_series(gi, gj, -lags[backward], rtol, max_terms)
        except SeriesDiverged as e:
            if not fallback:
                raise
            logger.debug("series_numerator: closed form for l=%d (%s)", l, e)
            values[forward] = cross_moment_closed_form(gj, gi, lags[forward])
            if backward.any():
                values[backward] = cross_moment_closed_form(gi, gj, -lags[backward])
        total += 2.0 * values[1] - values[0] - values[2]
    return float(total)


# ---------------------------------------------------------------------------
# Gaussian-core families and correlation tables
# ---------------------------------------------------------------------------

Summand = Tuple[GammaKernel, int]


@dataclass(frozen=True)
class CoreFamily:
    """
    A stack of Gaussian processes built from the kernel grid

    Each member is a sum of summands int g(t - s) dW^(m)_s given as (kernel, m).
    Targets:
        "component": G^(i) = sum_l int g^(i,l) dW^(l)           labels (i,)
        "triple":    G^(k,r;m) = int g^(k,r) dW^(m)             labels (k, r, m)
        "pair":      G^(k,m) = int g^(k,m) dW^(m)               labels (k, m)
        "kernel":    int g^(k,r) dW for one shared measure W    labels (k, r)
    Labels are 1-based to match the index maps.
    """
    target: str
    p: int
    labels: Tuple[Tuple[int, ...], ...]
    summands: Tuple[Tuple[Summand, ...], ...]

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label: Tuple[int, ...]) -> int:
        return self.labels.index(tuple(label))


def core_family(spec: KernelSpec, target: str = "component") -> CoreFamily:
    """Build the Gaussian-core family for a target descriptor"""
    p = spec.p
    labels: List[Tuple[int, ...]] = []
    summands: List[Tuple[Summand, ...]] = []
    if target == "component":
        for i in range(p):
            labels.append((i + 1,))
            summands.append(tuple((spec.kernel(i, l), l) for l in range(p) if spec.kernel(i, l) is not None))
    elif target == "triple":
        for k in range(p):
            for r in range(p):
                for m in range(p):
                    labels.append((k + 1, r + 1, m + 1))
                    g = spec.kernel(k, r)
                    summands.append(((g, m),) if g is not None else ())
    elif target == "pair":
        for k in range(p):
            for m in range(p):
                labels.append((k + 1, m + 1))
                g = spec.kernel(k, m)
                summands.append(((g, m),) if g is not None else ())
    elif target == "kernel":
        for k in range(p):
            for r in range(p):
                labels.append((k + 1, r + 1))
                g = spec.kernel(k, r)
                summands.append(((g, 0),) if g is not None else ())
    else:
        raise ValueError(f"Unknown core family target '{target}'")
    return CoreFamily(target, p, tuple(labels), tuple(summands))


def family_variances(family: CoreFamily, n: int) -> np.ndarray:
    """Lag-0 increment variance of every member"""
    out = np.zeros(family.size)
    for a, terms in enumerate(family.summands):
        for ga, m in terms:
            for gb, w in terms:
                if m == w:
                    out[a] += increment_covariance(ga, gb, n, 0)
    return out


def family_profile(family: CoreFamily, n: int, max_lag: int, method: str = "auto") -> np.ndarray:
    """
    Unnormalized increment covariances E[Delta_1 G^a Delta_{1+d} G^b]

    Returns:
        Array of shape (members, members, max_lag + 1)
    """
    cache: Dict[Tuple[GammaKernel, GammaKernel], np.ndarray] = {}
    out = np.zeros((family.size, family.size, max_lag + 1))
    for a, terms_a in enumerate(family.summands):
        for b, terms_b in enumerate(family.summands):
            for ga, m in terms_a:
                for gb, w in terms_b:
                    if m != w:
                        continue
                    key = (ga, gb)
                    if key not in cache:
                        cache[key] = increment_profile(ga, gb, n, max_lag, method=method)
                    out[a, b] += cache[key]
    return out


@dataclass
class CorrelationTable:
    """
    Normalized increment correlations r^(n)(lag) for pairs of family members

    entries[(a, b)][d] = E[(Delta_1 G^a / tau_a)(Delta_{1+d} G^b / tau_b)], keyed by member labels
    """
    n: int
    regime: str
    entries: Dict[Tuple[Tuple[int, ...], Tuple[int, ...]], np.ndarray]
    labels: Tuple[Tuple[int, ...], ...] = field(default_factory=tuple)

    @property
    def max_lag(self) -> int:
        return min(len(v) for v in self.entries.values()) - 1

    def value(self, a: Tuple[int, ...], b: Tuple[int, ...], k: int) -> float:
        return float(self.entries[(tuple(a), tuple(b))][k])

    def as_array(self) -> np.ndarray:
        size = len(self.labels)
        out = np.zeros((size, size, self.max_lag + 1))
        for x, la in enumerate(self.labels):
            for y, lb in enumerate(self.labels):
                out[x, y] = self.entries[(la, lb)][: self.max_lag + 1]
        return out


def correlation_table(
    family: CoreFamily,
    n: int,
    max_lag: int,
    normalization: Optional[Sequence[float]] = None,
    regime: str = "CaseI",
    method: str = "auto",
) -> CorrelationTable:
    """
    Correlation table of a core family

    Args:
        family: Gaussian-core family
        n: Resolution
        max_lag: Largest lag K
        normalization: Per-member scaling factor; the member's own increment
            standard deviation (Case I) when omitted. Zero members use 1.
        regime: Regime tag stored on the table
        method: increment_profile method

    Raises:
        DegenerateVariance: if a normalization value is not positive
        NonConvergent: if a normalized entry leaves [-1 - tol, 1 + tol] in Case I
    """
    profile = family_profile(family, n, max_lag, method=method)
    variances = np.diagonal(profile[:, :, 0]).copy()
    if normalization is None:
        scale = np.where(variances > 0.0, np.sqrt(np.maximum(variances, 0.0)), 1.0)
        empty = np.array([len(t) == 0 for t in family.summands])
        if np.any((variances <= 0.0) & ~empty):
            raise DegenerateVariance(f"Non-positive increment variance at n={n}")
    else:
        scale = np.asarray(normalization, dtype=float)
        if scale.shape != (family.size,) or np.any(scale <= 0.0):
            raise DegenerateVariance("Normalization must be positive, one value per member")
    rho = profile / (scale[:, None, None] * scale[None, :, None])
    if normalization is None:
        for a in range(family.size):
            if variances[a] > 0.0:
                rho[a, a, 0] = 1.0
        if np.any(np.abs(rho) > 1.0 + CORRELATION_TOL):
            raise NonConvergent(f"Correlation magnitude {np.max(np.abs(rho)):.12f} exceeds 1 at n={n}")
    entries = {
        (la, lb): rho[x, y]
        for x, la in enumerate(family.labels)
        for y, lb in enumerate(family.labels)
    }
    return CorrelationTable(n=n, regime=regime, entries=entries, labels=family.labels)


# ---------------------------------------------------------------------------
# Assumption diagnostics
# ---------------------------------------------------------------------------

def _fit_slope(x: np.ndarray, y: np.ndarray) -> float:
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)


def check_assumption_squared_correlations(table: CorrelationTable, max_lag: int) -> Dict[str, Any]:
    """
    Heuristic finite-(n, K) check that sum_k r(k)^2 stays bounded

    Reports partial sums per member pair, the Cauchy increment S_K - S_{K/2},
    the power-law exponent of r(k)^2 fitted over the upper half of the lags,
    and a pass/warn verdict (pass when every fitted summand exponent is
    below -1 or the increments are negligible).
    """
    if max_lag < MIN_AUDIT_LAGS:
        raise InsufficientLags(f"At least {MIN_AUDIT_LAGS} lags required, got {max_lag}")
    if table.max_lag < max_lag:
        raise InsufficientLags(f"Table holds {table.max_lag} lags, {max_lag} requested")

    records = []
    verdict = "pass"
    for (a, b), values in table.entries.items():
        r2 = np.asarray(values[1: max_lag + 1]) ** 2
        partial = np.cumsum(r2)
        s_full = float(partial[-1])
        s_half = float(partial[max_lag // 2 - 1])
        increment = s_full - s_half
        lags = np.arange(max_lag // 2, max_lag + 1)
        tail = r2[lags - 1]
        positive = tail > 0.0
        exponent = _fit_slope(lags[positive], tail[positive]) if positive.sum() >= 2 else float("-inf")
        ok = increment < 1e-4 or exponent < -1.0
        if not ok:
            verdict = "warn"
        records.append({
            "pair": (a, b),
            "partial_sum": s_full,
            "cauchy_increment": increment,
            "summand_exponent": exponent,
            "ok": bool(ok),
        })
    if verdict == "warn":
        logger.warning("Squared-correlation check: partial sums still growing at K=%d (n=%d)", max_lag, table.n)
    return {"check": "squared_correlations", "n": table.n, "max_lag": max_lag,
            "verdict": verdict, "heuristic": True, "records": records}


def _pi_integrals(kernel: GammaKernel, n: int, cut: float) -> Tuple[float, float]:
    h = 1.0 / n

    def f(s: float) -> float:
        return (kernel.scalar(s + h) - kernel.scalar(s)) ** 2

    x_max = tail_cutoff(2.0 * kernel.lam, max(cut, 1.0), growth=max(2.0 * kernel.delta, 0.0))
    s0 = min(2.0 * kernel.delta, 0.0)

    def span(lo: float, hi: float, label: str) -> float:
        edges = sorted({lo, hi} | {e for e in (h, 1.0) if lo < e < hi})
        panels = [(edges[q], edges[q + 1], s0 if edges[q] == 0.0 else 0.0) for q in range(len(edges) - 1)]
        return integrate_panels(f, panels, label=label)

    return span(0.0, cut, "pi_inner"), span(cut, x_max, "pi_outer")


def pi_measure(kernel: GammaKernel, n: int, cut: float) -> float:
    """pi_n((cut, inf)) = int_cut^inf (g(s+1/n) - g(s))^2 ds / int_0^inf (g(s+1/n) - g(s))^2 ds"""
    if cut <= 0.0:
        return 1.0
    inside, outside = _pi_integrals(kernel, n, cut)
    total = inside + outside
    if total <= 0.0:
        raise DegenerateVariance(f"Squared kernel increments integrate to zero at n={n}")
    return outside / total


def check_assumption_pi_decay(kernel: GammaKernel, n_grid: Sequence[int], kappa_grid: Sequence[float]) -> Dict[str, Any]:
    """
    Fit pi_n((n^-kappa, inf)) ~ n^(lambda (1 - kappa)) and report lambda per kappa

    Verdict pass when every fitted lambda is below -1, warn otherwise. For
    g(t) ~ t^delta near zero the fitted lambda tends to 2 delta - 1, so the
    decay condition holds only for delta < 0. A warn for delta >= 0 records
    that this sufficient condition is not met; it does not reject the kernel,
    whose admissibility is decided by delta in (-1/2, 1/2).
    """
    if any(not (0.0 < kappa < 1.0) for kappa in kappa_grid):
        raise DomainError("kappa values must lie in (0, 1)")
    records = []
    verdict = "pass"
    ns = np.asarray(list(n_grid), dtype=float)
    for kappa in kappa_grid:
        values = np.array([pi_measure(kernel, int(n), float(n) ** (-kappa)) for n in n_grid])
        positive = values > 0.0
        if positive.sum() >= 2:
            slope = _fit_slope(ns[positive], values[positive])
        else:
            slope = float("-inf")
        fitted = slope / (1.0 - kappa)
        ok = fitted < -1.0
        if not ok:
            verdict = "warn"
        records.append({"kappa": float(kappa), "pi": values.tolist(), "slope": slope,
                        "fitted_lambda": fitted, "ok": bool(ok)})
    return {"check": "pi_decay", "delta": kernel.delta, "lambda": kernel.lam,
            "n_grid": [int(n) for n in n_grid], "verdict": verdict, "records": records}


def cross_check(ki: GammaKernel, kj: GammaKernel, h: float) -> Dict[str, float]:
    """Series vs quadrature cross-moment, reporting the relative gap"""
    quad = cross_moment(ki, kj, h)
    try:
        series = float(cross_moment_series(ki, kj, h)[0])
    except SeriesDiverged:
        series = float(cross_moment_closed_form(ki, kj, h)[0])
    gap = abs(series - quad) / max(abs(quad), 1e-300)
    return {"quadrature": quad, "series": series, "relative_gap": gap, "ok": gap <= CROSS_CHECK_RTOL}
