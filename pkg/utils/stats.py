"""Monte Carlo comparison statistics: standard errors, z-scores and normality checks"""

import logging
from typing import Tuple

import numpy as np
from scipy import stats

from config.constants import BOOTSTRAP_RESAMPLES, KURTOSIS_UNSTABLE, NORMALITY_LEVEL
from utils.rng import STREAM_BOOTSTRAP, substream

logger = logging.getLogger(__name__)


def mean_and_se(samples: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Sample mean and its standard error along axis 0"""
    samples = np.asarray(samples, dtype=float)
    m = samples.shape[0]
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / np.sqrt(m) if m > 1 else np.full_like(mean, np.inf)
    return mean, se


def covariance_and_se(samples: np.ndarray, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sample covariance matrix with entrywise standard errors

    The SE of entry (i, j) is the standard deviation of the centered products
    (X_i - mean_i)(X_j - mean_j) over sqrt(M), i.e. the fourth-moment formula.
    When the products have unstable kurtosis a bootstrap over paths is used.

    Args:
        samples: M x d array, one row per Monte Carlo path
        seed: Seed for the bootstrap fallback

    Returns:
        (d x d covariance, d x d standard errors)
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    m, d = samples.shape
    centered = samples - samples.mean(axis=0)
    products = centered[:, :, None] * centered[:, None, :]
    cov = products.sum(axis=0) / (m - 1)
    se = products.std(axis=0, ddof=1) / np.sqrt(m)

    flat = products.reshape(m, d * d)
    kurt = np.nan_to_num(stats.kurtosis(flat, axis=0, fisher=True, bias=False))
    if np.any(~np.isfinite(se)) or np.max(np.abs(kurt)) > KURTOSIS_UNSTABLE:
        logger.warning("Unstable fourth moments (max excess kurtosis %.1f), using bootstrap SE",
                       float(np.max(np.abs(kurt))))
        se = bootstrap_covariance_se(samples, seed=seed)
    return cov, se


def bootstrap_covariance_se(samples: np.ndarray, resamples: int = BOOTSTRAP_RESAMPLES, seed: int = 0) -> np.ndarray:
    """Bootstrap standard errors of the sample covariance matrix"""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    m = samples.shape[0]
    rng = substream(seed, 0, STREAM_BOOTSTRAP)
    draws = []
    for _ in range(resamples):
        idx = rng.integers(0, m, size=m)
        draws.append(np.atleast_2d(np.cov(samples[idx], rowvar=False, ddof=1)))
    return np.std(np.stack(draws), axis=0, ddof=1)


def z_score(empirical: float, target: float, se: float) -> float:
    """Standardized deviation; exact agreement with zero SE scores 0"""
    diff = float(empirical) - float(target)
    if se > 0.0:
        return diff / float(se)
    return 0.0 if diff == 0.0 else float(np.copysign(np.inf, diff))


def jarque_bera_pvalues(samples: np.ndarray) -> np.ndarray:
    """Jarque-Bera p-value per column of an M x d sample array"""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    return np.array([stats.jarque_bera(samples[:, j]).pvalue for j in range(samples.shape[1])])


def passes_normality(samples: np.ndarray, level: float = NORMALITY_LEVEL) -> bool:
    """Bonferroni-corrected Jarque-Bera check across columns"""
    pvalues = jarque_bera_pvalues(samples)
    return bool(np.all(pvalues > level / len(pvalues)))
