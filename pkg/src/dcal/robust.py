"""Skipped correlation: Pearson on the points surviving projection-based
bivariate outlier removal.

Every observation serves as a direction anchor: all points are projected
onto the line through the coordinate-wise median center and that anchor,
and a point is flagged when its projection lies beyond
``median + cutoff * spread`` in any direction.  The spread is the
normal-consistent MAD, falling back to the normal-consistent IQR when the
MAD collapses to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DataPair, pearson
from .errors import DegenerateGeometryError, InsufficientDataError

__all__ = ["SkippedResult", "detect_bivariate_outliers", "skipped_correlation"]

# sqrt of the 0.975 quantile of chi-square with 1 df: the classical
# MAD-median rejection constant for a univariate projection
DEFAULT_CUTOFF = 2.2414027276049473

_MAD_TO_SIGMA = 0.6744897501960817  # Phi^-1(0.75)
_IQR_TO_SIGMA = 1.3489795003921634  # 2 * Phi^-1(0.75)

_MIN_SAMPLES = 10


@dataclass(frozen=True)
class SkippedResult:
    """Robust correlation on the retained points plus the removal bookkeeping."""

    r: float
    p: float
    n_used: int
    outlier_indices: tuple[int, ...]


def detect_bivariate_outliers(pair: DataPair, cutoff: float = DEFAULT_CUTOFF) -> np.ndarray:
    """Indices of bivariate outliers found by the projection sweep.

    Needs at least 10 points; with fewer, median/MAD estimates of the
    projections are too unstable to trust.
    """
    n = pair.n
    if n < _MIN_SAMPLES:
        raise InsufficientDataError(
            f"projection outlier detection needs >= {_MIN_SAMPLES} points, got {n}"
        )
    points = np.column_stack([pair.x, pair.y])
    centered = points - np.median(points, axis=0)

    norms = np.hypot(centered[:, 0], centered[:, 1])
    anchors = norms > 0.0  # a point sitting on the center spans no direction
    if not np.any(anchors):
        raise DegenerateGeometryError("all points coincide with the median center")
    directions = centered[anchors] / norms[anchors, None]

    projections = centered @ directions.T  # (n, n_directions)
    medians = np.median(projections, axis=0)
    mad = np.median(np.abs(projections - medians), axis=0)
    scales = mad / _MAD_TO_SIGMA
    flat = scales == 0.0
    if np.any(flat):
        q75, q25 = np.percentile(projections[:, flat], [75, 25], axis=0)
        scales[flat] = (q75 - q25) / _IQR_TO_SIGMA
        if np.any(scales == 0.0):
            raise DegenerateGeometryError(
                "a projection direction has zero MAD and zero interquartile spread"
            )
    flagged = np.any(projections > medians + cutoff * scales, axis=1)
    return np.flatnonzero(flagged)


def skipped_correlation(pair: DataPair, cutoff: float = DEFAULT_CUTOFF) -> SkippedResult:
    """Pearson r and exact t p-value on the points that survive outlier removal.

    With no flagged points this reproduces the classical result exactly.  The
    p-value is the plain t-test at n_used - 2 degrees of freedom; it does not
    re-adjust critical values for the data-dependent removal.
    """
    flagged = detect_bivariate_outliers(pair, cutoff=cutoff)
    keep = np.ones(pair.n, dtype=bool)
    keep[flagged] = False
    n_used = int(keep.sum())
    if n_used < 4:
        raise InsufficientDataError(
            f"only {n_used} points remain after outlier removal; need >= 4"
        )
    retained = pearson(DataPair(pair.x[keep], pair.y[keep]))
    return SkippedResult(
        r=retained.r,
        p=retained.p,
        n_used=n_used,
        outlier_indices=tuple(int(i) for i in flagged),
    )
