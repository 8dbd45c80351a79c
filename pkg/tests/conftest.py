"""Shared fixtures and independent oracles for the test suite.

The oracles here deliberately avoid the library's own code paths: LOO is a
refit per fold through np.polyfit (SVD least squares), and the step-down /
step-up adjustments follow their textbook definitions with explicit loops.
"""

import numpy as np
import pytest

from dcal import DataPair, gen_pair

ANSCOMBE = {
    "A": (
        [10, 8, 13, 9, 11, 14, 6, 4, 12, 7, 5],
        [8.04, 6.95, 7.58, 8.81, 8.33, 9.96, 7.24, 4.26, 10.84, 4.82, 5.68],
    ),
    "B": (
        [10, 8, 13, 9, 11, 14, 6, 4, 12, 7, 5],
        [9.14, 8.14, 8.74, 8.77, 9.26, 8.10, 6.13, 3.10, 9.13, 7.26, 4.74],
    ),
    "C": (
        [10, 8, 13, 9, 11, 14, 6, 4, 12, 7, 5],
        [7.46, 6.77, 12.74, 7.11, 7.81, 8.84, 6.08, 5.39, 8.15, 6.42, 5.73],
    ),
    "D": (
        [8, 8, 8, 8, 8, 8, 8, 19, 8, 8, 8],
        [6.58, 5.76, 7.71, 8.84, 8.47, 7.04, 5.25, 12.50, 5.56, 7.91, 6.89],
    ),
}


@pytest.fixture
def anscombe_pairs():
    return {name: DataPair(x, y) for name, (x, y) in ANSCOMBE.items()}


def naive_loo(predictor, response):
    """Leave-one-out by refitting n times with np.polyfit."""
    predictor = np.asarray(predictor, dtype=float)
    response = np.asarray(response, dtype=float)
    n = len(predictor)
    out = np.empty(n)
    for i in range(n):
        mask = np.ones(n, dtype=bool)
        mask[i] = False
        if np.ptp(predictor[mask]) == 0:
            raise ZeroDivisionError(f"degenerate leave-one-out subset at {i}")
        slope, intercept = np.polyfit(predictor[mask], response[mask], 1)
        out[i] = intercept + slope * predictor[i]
    return out


def brute_holm(p):
    """Step-down definition evaluated literally, ties broken by index."""
    p = np.asarray(p, dtype=float)
    m = len(p)
    order = sorted(range(m), key=lambda i: (p[i], i))
    rank = {idx: pos for pos, idx in enumerate(order)}
    out = np.empty(m)
    for i in range(m):
        candidates = [
            min(1.0, (m - rank[j]) * p[j]) for j in range(m) if rank[j] <= rank[i]
        ]
        out[i] = max(candidates)
    return out


def brute_bh(p):
    """Step-up definition evaluated literally, ties broken by index."""
    p = np.asarray(p, dtype=float)
    m = len(p)
    order = sorted(range(m), key=lambda i: (p[i], i))
    rank = {idx: pos for pos, idx in enumerate(order)}
    out = np.empty(m)
    for i in range(m):
        candidates = [
            min(1.0, m * p[j] / (rank[j] + 1)) for j in range(m) if rank[j] >= rank[i]
        ]
        out[i] = min(candidates)
    return out


def seeded_pair(n, rho, seed):
    return gen_pair(n, rho, seed)
