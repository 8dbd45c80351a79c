"""Posterior-style p-value calibrations and the Bayes-factor baseline.

These are the comparison methods: monotone transforms mapping a p-value to
an (approximate lower bound on the) posterior probability of the null, plus
a numerically integrated correlation Bayes factor.  Each returns a value in
[0, 1] that is compared against alpha the same way a p-value would be.
"""

from __future__ import annotations

import math

import numpy as np

from .core import DataPair, pearson
from .errors import ConvergenceError

__all__ = ["pcal_sellke", "pcal_bickel", "bf_to_posterior", "correlation_bf"]

_INV_E = 1.0 / math.e

# adaptive trapezoid settings for the Bayes factor integral
_BF_REL_TOL = 1e-6
_BF_START_INTERVALS = 128
_BF_MAX_INTERVALS = 2 ** 21
_LOG_DBL_MAX = math.log(np.finfo(np.float64).max)


def _check_p(p: float) -> float:
    p = float(p)
    if math.isnan(p) or p < 0.0 or p > 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return p


def pcal_sellke(p: float) -> float:
    """Sellke-style lower bound on the posterior probability of the null.

    For p < 1/e the bound is (1 + (-e p ln p)^-1)^-1; beyond 1/e the bound
    saturates at its maximum of 0.5.  p = 0 maps to the limit 0.
    """
    p = _check_p(p)
    if p == 0.0:
        return 0.0
    if p >= _INV_E:
        return 0.5
    bound = -math.e * p * math.log(p)
    return 1.0 / (1.0 + 1.0 / bound)


def pcal_bickel(p: float) -> float:
    """Bickel-style calibration (1 - |2.7 p ln p|) p + 2 |2.7 p ln p|.

    The 2.7 constant is used literally, not as e.  The raw expression can
    exceed 1 for mid-range p, so the result is clamped to [0, 1].  p = 0 maps
    to the limit 0.
    """
    p = _check_p(p)
    if p == 0.0:
        return 0.0
    a = abs(2.7 * p * math.log(p))
    return min(1.0, max(0.0, (1.0 - a) * p + 2.0 * a))


def bf_to_posterior(bf10: float, prior_h1: float = 0.5) -> float:
    """Posterior P(H1 | data) from a Bayes factor and a prior P(H1)."""
    if not 0.0 < prior_h1 < 1.0:
        raise ValueError(f"prior must lie strictly between 0 and 1, got {prior_h1}")
    if math.isnan(bf10) or bf10 <= 0.0:
        raise ValueError(f"bf10 must be positive, got {bf10}")
    if math.isinf(bf10):
        return 1.0
    odds = bf10 * prior_h1
    return odds / (odds + (1.0 - prior_h1))


def _log_bf_trapezoid(r: float, n: int, intervals: int) -> float:
    """log of the uniform-prior integral of the correlation sampling kernel.

    The kernel in rho is (1 - rho^2)^((n-1)/2) * (1 - rho r)^-(n - 3/2); the
    factor depending on r alone cancels against the rho = 0 denominator, so
    the Bayes factor is half the integral of the kernel over (-1, 1).
    Evaluated in log space so large n cannot overflow midway.
    """
    rho = np.linspace(-1.0, 1.0, intervals + 1)
    inner = rho[1:-1]
    log_kernel = np.empty(intervals + 1)
    log_kernel[0] = -np.inf  # (1 - rho^2) term vanishes at both endpoints
    log_kernel[-1] = -np.inf
    log_kernel[1:-1] = 0.5 * (n - 1) * np.log1p(-inner * inner) - (n - 1.5) * np.log1p(
        -inner * r
    )
    peak = float(np.max(log_kernel))
    weights = np.ones(intervals + 1)
    weights[0] = weights[-1] = 0.5
    h = 2.0 / intervals
    total = float(np.dot(weights, np.exp(log_kernel - peak))) * h
    return math.log(0.5) + peak + math.log(total)


def correlation_bf(pair: DataPair) -> float:
    """Bayes factor BF10 for a nonzero correlation, uniform prior on rho.

    Integrates the approximate sampling density of r given rho against a
    uniform prior on (-1, 1) and divides by the density at rho = 0, with
    trapezoid refinement until the estimate is stable to 1e-6 relative.
    Perfect correlation returns +inf (overwhelming evidence sentinel).
    """
    res = pearson(pair)
    if abs(res.r) >= 1.0:
        return math.inf
    intervals = _BF_START_INTERVALS
    log_bf = _log_bf_trapezoid(res.r, res.n, intervals)
    while intervals < _BF_MAX_INTERVALS:
        intervals *= 2
        refined = _log_bf_trapezoid(res.r, res.n, intervals)
        done = abs(refined - log_bf) < _BF_REL_TOL
        log_bf = refined
        if done:
            if log_bf > _LOG_DBL_MAX:
                return math.inf
            return math.exp(log_bf)
    raise ConvergenceError(
        f"Bayes factor integration did not stabilize within {_BF_MAX_INTERVALS} intervals"
    )
