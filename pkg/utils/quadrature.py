"""Adaptive quadrature helpers for improper integrals with endpoint singularities"""

import logging
import math
from typing import Callable, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from config.constants import QUAD_ATOL, QUAD_LIMIT, QUAD_RTOL, TAIL_EPS
from exceptions import NonConvergent

logger = logging.getLogger(__name__)


def _quad(f: Callable[[float], float], lo: float, hi: float, rtol: float,
          points: Optional[Sequence[float]] = None) -> Tuple[float, float]:
    if hi <= lo:
        return 0.0, 0.0
    inner = None
    if points:
        inner = [x for x in points if lo < x < hi] or None
    value, abserr, *_ = integrate.quad(
        f, lo, hi,
        epsabs=QUAD_ATOL,
        epsrel=rtol,
        limit=QUAD_LIMIT,
        points=inner,
        full_output=1,
    )
    return value, abserr


def integrate_panel(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    singular_exponent: float = 0.0,
    rtol: float = QUAD_RTOL,
    points: Optional[Sequence[float]] = None,
) -> Tuple[float, float]:
    """
    Integrate f over [lo, hi] where f(x) ~ (x - lo)^s near lo

    For s < 0 the substitution x = lo + u^(1/(1+s)) turns the integrable
    singularity into a bounded integrand.

    Args:
        f: Scalar integrand
        lo: Lower limit (singular end)
        hi: Upper limit
        singular_exponent: Exponent s of the algebraic behaviour at lo
        rtol: Relative tolerance handed to QUADPACK
        points: Optional breakpoints in x coordinates (plain panels only)

    Returns:
        (value, absolute error estimate)
    """
    if hi <= lo:
        return 0.0, 0.0
    s = singular_exponent
    if s >= 0.0:
        return _quad(f, lo, hi, rtol, points)

    q = 1.0 / (1.0 + s)
    u_hi = (hi - lo) ** (1.0 + s)

    def g(u: float) -> float:
        if u <= 0.0:
            return 0.0
        return f(lo + u ** q) * q * u ** (q - 1.0)

    return _quad(g, 0.0, u_hi, rtol)


def tail_cutoff(rate: float, start: float, growth: float = 0.0) -> float:
    """Point beyond which x^growth * exp(-rate * x) stays below TAIL_EPS relative to start"""
    budget = -math.log(TAIL_EPS)
    x = start + budget / rate
    # one fixed-point pass absorbs the polynomial factor
    if growth > 0.0:
        x = start + (budget + growth * math.log(max(x, 1.0))) / rate
    return x


def integrate_panels(
    f: Callable[[float], float],
    panels: Iterable[Tuple[float, float, float]],
    rtol: float = QUAD_RTOL,
    label: str = "integral",
) -> float:
    """
    Sum integrate_panel over (lo, hi, singular_exponent) panels and enforce tolerance

    Each panel is asked for rtol relative to its own value, so the combined error
    may reach rtol times the summed panel magnitudes. When panels cancel, that is
    more than rtol * |value|; this is logged as a warning.

    Raises:
        NonConvergent: if the combined error estimate exceeds rtol times the summed
            panel magnitudes plus QUAD_ATOL, or the value is not finite
    """
    total = 0.0
    error = 0.0
    magnitude = 0.0
    for lo, hi, s in panels:
        points = None
        if s >= 0.0 and hi - lo > 0.0 and lo > 0.0:
            # geometric breakpoints resolve features at the scale of lo
            points = list(lo * np.geomspace(2.0, max(2.0, hi / lo), num=8)[:-1])
        value, abserr = integrate_panel(f, lo, hi, s, rtol=rtol, points=points)
        total += value
        error += abserr
        magnitude += abs(value)
        logger.debug("%s panel [%g, %g] s=%g -> %.16g (err %.2e)", label, lo, hi, s, value, abserr)

    if not np.isfinite(total) or error > rtol * magnitude + QUAD_ATOL:
        raise NonConvergent(
            f"{label}: error estimate {error:.3e} exceeds tolerance for value {total:.6e}"
        )
    if error > rtol * abs(total) + QUAD_ATOL:
        logger.warning("%s: panels cancel, error estimate %.2e is above rtol for value %.6e",
                       label, error, total)
    return total
