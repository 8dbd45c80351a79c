"""Foundational numerics: Pearson correlation, simple OLS, and fast leave-one-out.

All operations are pure functions of immutable inputs and safe to call from
multiple threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateVarianceError, InsufficientDataError
from .special import student_t_sf_two_sided

__all__ = [
    "DataPair",
    "CorrelationResult",
    "OlsFit",
    "pearson",
    "ols_fit",
    "loo_predictions",
]

# 1 - leverage below this is treated as an exactly degenerate leave-one-out
# subset (the remaining predictor values carry no usable spread)
_LEVERAGE_GUARD = 1e-10


def _as_sample(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class DataPair:
    """Two equal-length real-valued samples under test.

    Construction enforces: length >= 4, all values finite, and strictly
    positive variance in both coordinates.  Degenerate (constant) columns are
    a hard error here so they can never silently contribute r = 0 to a
    battery's false-positive counts.
    """

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = _as_sample(self.x, "x")
        y = _as_sample(self.y, "y")
        if x.shape[0] != y.shape[0]:
            raise ValueError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
        if x.shape[0] < 4:
            raise InsufficientDataError(f"need at least 4 samples, got {x.shape[0]}")
        if np.ptp(x) == 0.0:
            raise DegenerateVarianceError("x has zero variance")
        if np.ptp(y) == 0.0:
            raise DegenerateVarianceError("y has zero variance")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    p: float
    n: int
    df: int


@dataclass(frozen=True)
class OlsFit:
    """Simple-linear OLS fit with the per-sample hat-matrix diagonals."""

    intercept: float
    slope: float
    residuals: np.ndarray = field(repr=False)
    leverages: np.ndarray = field(repr=False)

    def predict(self, predictor) -> np.ndarray:
        return self.intercept + self.slope * np.asarray(predictor, dtype=np.float64)


def pearson(pair: DataPair) -> CorrelationResult:
    """Pearson correlation with the exact two-sided t-test p-value.

    The p-value is the Student-t tail probability of
    t = r * sqrt((n - 2) / (1 - r^2)) at n - 2 degrees of freedom, evaluated
    through the incomplete beta identity so that near-perfect correlations do
    not lose precision to cancellation.
    """
    x = pair.x
    y = pair.y
    n = pair.n
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(np.dot(xc, xc))
    syy = float(np.dot(yc, yc))
    sxy = float(np.dot(xc, yc))
    denom2 = sxx * syy
    r = max(-1.0, min(1.0, sxy / math.sqrt(denom2)))
    df = n - 2
    # 1 - r^2 computed from the sums directly; exact 0 for collinear input
    one_minus_r2 = max(0.0, (denom2 - sxy * sxy) / denom2)
    if one_minus_r2 == 0.0:
        p = 0.0
    else:
        t_squared = r * r * df / one_minus_r2
        p = min(1.0, student_t_sf_two_sided(t_squared, df))
    return CorrelationResult(r=r, p=p, n=n, df=df)


def ols_fit(predictor, response) -> OlsFit:
    """Least-squares line fit of ``response`` on ``predictor``.

    Requires at least 3 points and nonzero predictor variance.
    """
    x = _as_sample(predictor, "predictor")
    y = _as_sample(response, "response")
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    n = x.shape[0]
    if n < 3:
        raise InsufficientDataError(f"need at least 3 points for a line fit, got {n}")
    xbar = x.mean()
    xc = x - xbar
    sxx = float(np.dot(xc, xc))
    if sxx == 0.0:
        raise DegenerateVarianceError("predictor has zero variance")
    slope = float(np.dot(xc, y)) / sxx
    intercept = float(y.mean()) - slope * float(xbar)
    residuals = y - (intercept + slope * x)
    leverages = 1.0 / n + xc * xc / sxx
    residuals.flags.writeable = False
    leverages.flags.writeable = False
    return OlsFit(intercept=intercept, slope=slope, residuals=residuals, leverages=leverages)


def loo_predictions(predictor, response) -> np.ndarray:
    """Leave-one-out predictions of ``response`` at each ``predictor`` value.

    Uses the hat-matrix shortcut yhat_i = y_i - e_i / (1 - h_ii), which is the
    full n-refit answer in O(n) total.  A leverage of (numerically) 1 means
    the remaining points have no predictor spread, i.e. the leave-one-out fit
    itself would be degenerate, and raises accordingly.
    """
    x = _as_sample(predictor, "predictor")
    if x.shape[0] < 4:
        raise InsufficientDataError(f"need at least 4 points for LOO, got {x.shape[0]}")
    fit = ols_fit(x, response)
    margin = 1.0 - fit.leverages
    if np.any(margin <= _LEVERAGE_GUARD):
        bad = int(np.argmin(margin))
        raise DegenerateVarianceError(
            f"leave-one-out subset excluding index {bad} has zero predictor variance"
        )
    return np.asarray(response, dtype=np.float64) - fit.residuals / margin
