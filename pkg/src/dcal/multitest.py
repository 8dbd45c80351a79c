"""Multiple-testing corrections: Holm, Benjamini-Hochberg, and permutation tests.

The permutation test shuffles the shared target once per permutation and
recomputes |r| for every column, so the per-test and max-statistic p-values
of one plan come from the same shuffles; that makes the max-statistic
p-values dominate the per-test ones exactly, not just in expectation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .core import DataPair
from .errors import DegenerateVarianceError
from .rng import Stream, derive

__all__ = [
    "PermutationPlan",
    "holm_adjust",
    "bh_adjust",
    "perm_test",
    "permutation_pvalues",
]


@dataclass(frozen=True)
class PermutationPlan:
    """Number of label shuffles and the seed their streams derive from."""

    n_permutations: int = 999
    seed: int = 0

    def __post_init__(self):
        if self.n_permutations < 100:
            raise ValueError(
                f"need at least 100 permutations, got {self.n_permutations}"
            )


def _checked_pvalues(raw) -> np.ndarray:
    p = np.asarray(raw, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("need a nonempty 1-d vector of p-values")
    if np.any(np.isnan(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("p-values must lie in [0, 1]")
    return p


def _stable_order(p: np.ndarray) -> np.ndarray:
    # ties broken by original index so adjusted vectors are platform-stable
    return np.lexsort((np.arange(p.size), p))


def holm_adjust(raw: Sequence[float]) -> np.ndarray:
    """Step-down Holm adjustment, returned in the original order."""
    p = _checked_pvalues(raw)
    m = p.size
    order = _stable_order(p)
    scaled = p[order] * (m - np.arange(m))
    adjusted = np.minimum(1.0, np.maximum.accumulate(scaled))
    out = np.empty(m)
    out[order] = adjusted
    return out


def bh_adjust(raw: Sequence[float]) -> np.ndarray:
    """Step-up Benjamini-Hochberg adjustment, returned in the original order."""
    p = _checked_pvalues(raw)
    m = p.size
    order = _stable_order(p)
    scaled = p[order] * m / (np.arange(m) + 1.0)
    adjusted = np.minimum(1.0, np.minimum.accumulate(scaled[::-1])[::-1])
    out = np.empty(m)
    out[order] = adjusted
    return out


def permutation_pvalues(
    columns: np.ndarray, target: np.ndarray, plan: PermutationPlan
) -> tuple[np.ndarray, np.ndarray]:
    """Per-test and max-statistic permutation p-values for a battery.

    ``columns`` is (m, n); every row is tested against the shared ``target``.
    Permutation b shuffles the target with the stream derived from
    ``(plan.seed, b)``, so results do not depend on evaluation order or
    thread count.  P-values use the add-one convention
    (1 + #{more extreme}) / (B + 1).
    """
    X = np.asarray(columns, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != y.shape[0]:
        raise ValueError("columns must be (m, n) with n matching the target length")
    m, n = X.shape
    sd_x = X.std(axis=1)
    for j in np.flatnonzero(sd_x == 0.0):
        raise DegenerateVarianceError(f"column {int(j)} has zero variance")
    if y.std() == 0.0:
        raise DegenerateVarianceError("target has zero variance")

    Xs = (X - X.mean(axis=1, keepdims=True)) / sd_x[:, None]
    ys = (y - y.mean()) / y.std()
    observed = np.abs(Xs @ ys) / n

    B = plan.n_permutations
    count_per = np.zeros(m, dtype=np.int64)
    count_max = np.zeros(m, dtype=np.int64)
    for b in range(B):
        shuffled = ys[Stream(derive(plan.seed, b)).permutation(n)]
        stats = np.abs(Xs @ shuffled) / n
        count_per += stats >= observed
        count_max += stats.max() >= observed
    per_test = (1.0 + count_per) / (B + 1.0)
    max_stat = (1.0 + count_max) / (B + 1.0)
    return per_test, max_stat


def perm_test(
    battery: Sequence[DataPair],
    plan: PermutationPlan,
    mode: Literal["per_test", "max_stat"] = "per_test",
) -> np.ndarray:
    """Permutation p-values for a battery of pairs sharing one y variable."""
    if len(battery) == 0:
        raise ValueError("battery is empty")
    y = battery[0].y
    for i, pair in enumerate(battery[1:], start=1):
        if not np.array_equal(pair.y, y):
            raise ValueError(f"pair {i} does not share the battery's y variable")
    X = np.vstack([pair.x for pair in battery])
    per_test, max_stat = permutation_pvalues(X, y, plan)
    if mode == "per_test":
        return per_test
    if mode == "max_stat":
        return max_stat
    raise ValueError(f"unknown mode {mode!r}")
