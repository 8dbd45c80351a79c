"""The data-calibrated correlation test.

The test replaces each observation with its out-of-sample prediction under
the fitted linear relationship (one prediction per direction, x-from-y and
y-from-x) and applies the classical correlation test to the predictions.
Under the null, leave-one-out predictions tend to correlate *negatively*
with the raw data, so a calibrated correlation whose sign contradicts the
classical one is reset to the (0.0, 0.5) sentinel -- that reset is what keeps
the calibrated p-value interpretable without multiplicity correction.

Three out-of-sample schemes are supported:

* ``loo``      -- deterministic leave-one-out via the hat-matrix shortcut.
* ``kfold``    -- repeated k-fold; every repeat's fold-out predictions are
                  kept, so the output stacks ``repeats`` blocks of ``n``
                  values (repeat-major, original sample order).  Fold
                  partitions depend only on ``(seed, repeat)``, so the two
                  prediction directions of one test see identical folds and
                  their blocks stay aligned.
* ``boot632``  -- bootstrap .632: 0.368 * full-sample prediction
                  + 0.632 * mean out-of-bag prediction across replicates.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .core import DataPair, ols_fit, loo_predictions, pearson
from .errors import (
    DegenerateVarianceError,
    InsufficientDataError,
    ResampleCoverageError,
    UndefinedSignError,
)
from .rng import Stream, derive

__all__ = [
    "OosScheme",
    "DcalResult",
    "Y_FROM_X",
    "X_FROM_Y",
    "oos_predict",
    "dcal_test",
    "dcal_in_sample_check",
]

Y_FROM_X = "y_from_x"
X_FROM_Y = "x_from_y"

Direction = Literal["y_from_x", "x_from_y"]

# weights of the .632 blend: in-sample optimism vs out-of-bag pessimism
_W_IN = 0.368
_W_OOB = 0.632

_MAX_COVERAGE_RETRIES = 10


@dataclass(frozen=True)
class OosScheme:
    """Out-of-sample prediction scheme selector.

    ``seed`` feeds the deterministic resampling stream and is ignored by the
    (fully deterministic) leave-one-out variant.
    """

    kind: Literal["loo", "kfold", "boot632"]
    folds: int = 10
    repeats: int = 10
    replicates: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("loo", "kfold", "boot632"):
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.kind == "kfold":
            if self.folds < 2:
                raise ValueError("k-fold needs at least 2 folds")
            if self.repeats < 1:
                raise ValueError("k-fold needs at least 1 repeat")
        if self.kind == "boot632" and self.replicates < 1:
            raise ValueError("bootstrap needs at least 1 replicate")

    @classmethod
    def loo(cls) -> "OosScheme":
        return cls(kind="loo")

    @classmethod
    def repeated_kfold(cls, folds: int = 10, repeats: int = 10, seed: int = 0) -> "OosScheme":
        return cls(kind="kfold", folds=folds, repeats=repeats, seed=seed)

    @classmethod
    def boot632(cls, replicates: int = 100, seed: int = 0) -> "OosScheme":
        return cls(kind="boot632", replicates=replicates, seed=seed)

    @property
    def label(self) -> str:
        if self.kind == "loo":
            return "loo"
        if self.kind == "kfold":
            return f"cv{self.folds}x{self.repeats}"
        return "boot632"

    def reseeded(self, seed: int) -> "OosScheme":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class DcalResult:
    """Classical and calibrated correlation results plus diagnostics.

    When either flag is set, ``(r_dcal, p_dcal)`` is the ``(0.0, 0.5)``
    sentinel; otherwise the calibrated sign always matches the classical one.
    """

    r: float
    p: float
    r_dcal: float
    p_dcal: float
    sign_flip_triggered: bool
    skipped_by_fast_flag: bool
    scheme: OosScheme


def _kfold_predictions(predictor: np.ndarray, response: np.ndarray, scheme: OosScheme) -> np.ndarray:
    n = predictor.shape[0]
    if scheme.folds > n:
        raise ValueError(f"folds={scheme.folds} exceeds sample size {n}")
    largest_fold = -(-n // scheme.folds)
    if n - largest_fold < 3:
        raise InsufficientDataError(
            f"k-fold training sets would have {n - largest_fold} points; need >= 3"
        )
    sizes = [n // scheme.folds + (1 if i < n % scheme.folds else 0) for i in range(scheme.folds)]
    blocks = np.empty((scheme.repeats, n))
    for rep in range(scheme.repeats):
        # the partition depends only on (seed, repeat): both prediction
        # directions of one test see the same folds
        order = Stream(derive(scheme.seed, rep)).permutation(n)
        preds = blocks[rep]
        start = 0
        for size in sizes:
            fold = order[start : start + size]
            start += size
            mask = np.ones(n, dtype=bool)
            mask[fold] = False
            fit = ols_fit(predictor[mask], response[mask])
            preds[fold] = fit.predict(predictor[fold])
    return blocks.reshape(-1)


def _boot632_predictions(predictor: np.ndarray, response: np.ndarray, scheme: OosScheme) -> np.ndarray:
    n = predictor.shape[0]
    draws = [Stream(derive(scheme.seed, b)).integers(n, n) for b in range(scheme.replicates)]
    idx = np.vstack(draws)

    oob_sum = np.zeros(n)
    oob_count = np.zeros(n, dtype=np.int64)

    def accumulate(index_rows: np.ndarray) -> None:
        xs = predictor[index_rows]
        ys = response[index_rows]
        mx = xs.mean(axis=1, keepdims=True)
        my = ys.mean(axis=1, keepdims=True)
        sxx = ((xs - mx) ** 2).sum(axis=1)
        if np.any(sxx == 0.0):
            raise DegenerateVarianceError("bootstrap training sample has zero predictor variance")
        slope = ((xs - mx) * (ys - my)).sum(axis=1) / sxx
        intercept = my[:, 0] - slope * mx[:, 0]
        rows = index_rows.shape[0]
        flat = index_rows + (np.arange(rows) * n)[:, None]
        in_bag = np.bincount(flat.ravel(), minlength=rows * n).reshape(rows, n) > 0
        preds = intercept[:, None] + slope[:, None] * predictor[None, :]
        np.add(oob_sum, np.where(~in_bag, preds, 0.0).sum(axis=0), out=oob_sum)
        np.add(oob_count, (~in_bag).sum(axis=0), out=oob_count)

    accumulate(idx)
    extra = 0
    while np.any(oob_count == 0) and extra < _MAX_COVERAGE_RETRIES:
        more = Stream(derive(scheme.seed, scheme.replicates + extra)).integers(n, n)
        accumulate(more[None, :])
        extra += 1
    if np.any(oob_count == 0):
        missing = int(np.flatnonzero(oob_count == 0)[0])
        raise ResampleCoverageError(
            f"sample {missing} was never out-of-bag in "
            f"{scheme.replicates + extra} bootstrap replicates"
        )

    full = ols_fit(predictor, response)
    return _W_IN * full.predict(predictor) + _W_OOB * (oob_sum / oob_count)


def oos_predict(pair: DataPair, direction: Direction, scheme: OosScheme) -> np.ndarray:
    """Out-of-sample predictions in the requested direction.

    ``loo`` and ``boot632`` return one value per sample.  ``kfold`` returns
    ``repeats`` stacked blocks of per-sample values (repeat-major, original
    sample order); averaging the blocks would wash out the repeat-to-repeat
    spread that the calibrated test is supposed to see.  Deterministic given
    ``(pair, direction, scheme)``; resampling consumes only streams derived
    from ``scheme.seed``.
    """
    if direction == Y_FROM_X:
        predictor, response = pair.x, pair.y
    elif direction == X_FROM_Y:
        predictor, response = pair.y, pair.x
    else:
        raise ValueError(f"unknown direction {direction!r}")
    if scheme.kind == "loo":
        return loo_predictions(predictor, response)
    if scheme.kind == "kfold":
        return _kfold_predictions(predictor, response, scheme)
    return _boot632_predictions(predictor, response, scheme)


def _sign(v: float) -> int:
    if v > 0.0:
        return 1
    if v < 0.0:
        return -1
    return 0


def dcal_test(
    pair: DataPair,
    alpha: float = 0.05,
    fast: bool = False,
    scheme: OosScheme = OosScheme.loo(),
) -> DcalResult:
    """Run the calibrated correlation test on one pair.

    Computes the classical (r, p) first.  Unless ``fast`` is set and the
    classical test is already non-significant at ``alpha``, both mutual
    out-of-sample prediction vectors are computed and correlated; a
    calibrated sign that is zero or contradicts the classical sign resets the
    calibrated result to the (0.0, 0.5) sentinel with the flip flag set.

    A degenerate out-of-sample step (a leave-one-out or bootstrap training
    subset without predictor spread, or prediction vectors with no variance)
    means the relationship has no generalizable support; it is reported as a
    sign flip rather than an error.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie strictly between 0 and 1, got {alpha}")
    classical = pearson(pair)
    r_dcal, p_dcal = 0.0, 0.5
    flipped = False
    skipped = bool(fast and not (classical.p < alpha))
    if not skipped:
        try:
            y_hat = oos_predict(pair, Y_FROM_X, scheme)
            x_hat = oos_predict(pair, X_FROM_Y, scheme)
            calibrated = pearson(DataPair(x_hat, y_hat))
        except DegenerateVarianceError:
            flipped = True
        else:
            if calibrated.r == 0.0 or _sign(calibrated.r) != _sign(classical.r):
                flipped = True
            else:
                r_dcal, p_dcal = calibrated.r, calibrated.p
    return DcalResult(
        r=classical.r,
        p=classical.p,
        r_dcal=r_dcal,
        p_dcal=p_dcal,
        sign_flip_triggered=flipped,
        skipped_by_fast_flag=skipped,
        scheme=scheme,
    )


def dcal_in_sample_check(pair: DataPair) -> float:
    """Correlation of the full-sample (non-OOS) mutual predictions.

    Both in-sample prediction maps are affine with slopes sharing the sign of
    r, so this must reproduce the classical r exactly; it is the algebraic
    sanity anchor showing that out-of-sample prediction, not prediction per
    se, is what changes the test.
    """
    classical = pearson(pair)
    if classical.r == 0.0:
        raise UndefinedSignError("correlation is exactly zero; prediction sign undefined")
    fit_y = ols_fit(pair.x, pair.y)
    fit_x = ols_fit(pair.y, pair.x)
    calibrated = pearson(DataPair(fit_x.predict(pair.y), fit_y.predict(pair.x)))
    return calibrated.r
