"""Seeded data generators and experiment runners for the simulation studies.

Every random draw comes from a stream seeded by
``derive(master_seed, repetition, column, ...)``, so a report is a pure
function of its design and runs identically at any thread count.  Reports
are tidy long-format tables (one row per design cell x method x metric)
serializable to CSV and JSON.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .calibration import bf_to_posterior, correlation_bf, pcal_bickel, pcal_sellke
from .core import DataPair, pearson
from .engine import OosScheme, dcal_test
from .errors import DcalError
from .multitest import PermutationPlan, bh_adjust, holm_adjust, permutation_pvalues
from .robust import skipped_correlation
from .rng import Stream, derive
from .special import student_t_sf_two_sided

__all__ = [
    "OutlierKind",
    "NullBattery",
    "CorrelatedBattery",
    "EffectGrid",
    "Contaminated",
    "ExperimentReport",
    "gen_pair",
    "gen_contaminated",
    "run_battery_experiment",
    "run_oos_comparison",
    "run_effect_grid",
    "run_outlier_suite",
    "BATTERY_METHODS",
    "PAIR_METHODS",
]

# substream roles inside one repetition (columns occupy 1..m)
_KEY_TARGET = 0
_KEY_SCHEME = 2 ** 33
_KEY_PERM = 2 ** 34


@dataclass(frozen=True)
class OutlierKind:
    """Contamination model: redrawn high-variance points, or +shift outliers.

    ``sd_outlier`` applies to the high-variance kind (must exceed the unit
    population sd).  ``magnitude`` is the shift, in population sds, applied
    to x (univariate) or to both coordinates (bivariate).
    """

    kind: str  # "high_variance" | "univariate" | "bivariate"
    sd_outlier: float = 3.0
    magnitude: float = 8.0

    def __post_init__(self):
        if self.kind not in ("high_variance", "univariate", "bivariate"):
            raise ValueError(f"unknown outlier kind {self.kind!r}")
        if self.kind == "high_variance" and self.sd_outlier <= 1.0:
            raise ValueError("sd_outlier must exceed the unit population sd")


@dataclass(frozen=True)
class NullBattery:
    """m independent x variables tested against one independent y."""

    m: int
    n: int
    seed: int


@dataclass(frozen=True)
class CorrelatedBattery:
    """m_true columns correlated with y at rho, plus m_null independent ones."""

    m_true: int
    m_null: int
    rho: float
    n: int
    seed: int


@dataclass(frozen=True)
class EffectGrid:
    """One pair per (rho, n) cell and repetition, for effect-size sweeps."""

    rho_list: tuple[float, ...]
    n_list: tuple[int, ...]
    seed: int


@dataclass(frozen=True)
class Contaminated:
    """Single contaminated-pair design cell."""

    rho: float
    outlier: OutlierKind
    fraction: float
    n: int
    seed: int


@dataclass
class ExperimentReport:
    """Tidy records (design cell x method x metric) plus run metadata."""

    records: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, design: str, cell: str, method: str, metric: str, value: float | None) -> None:
        self.records.append(
            {"design": design, "cell": cell, "method": method, "metric": metric, "value": value}
        )

    def value(self, method: str, metric: str, cell: str | None = None) -> float:
        hits = [
            rec["value"]
            for rec in self.records
            if rec["method"] == method
            and rec["metric"] == metric
            and (cell is None or rec["cell"] == cell)
        ]
        if len(hits) != 1:
            raise KeyError(
                f"expected exactly one record for ({method}, {metric}, {cell}), found {len(hits)}"
            )
        return hits[0]

    def write_csv(self, path) -> None:
        lines = ["design,cell,method,metric,value"]
        for rec in self.records:
            value = "" if rec["value"] is None else repr(rec["value"])
            lines.append(
                f"{rec['design']},\"{rec['cell']}\",{rec['method']},{rec['metric']},{value}"
            )
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump({"meta": self.meta, "records": self.records}, fh, indent=2)
            fh.write("\n")


def gen_pair(n: int, rho: float, seed: int) -> DataPair:
    """Bivariate Gaussian pair with population correlation exactly rho."""
    if n < 4:
        raise ValueError(f"need n >= 4, got {n}")
    if not -1.0 < rho < 1.0:
        raise ValueError(f"rho must lie strictly inside (-1, 1), got {rho}")
    stream = Stream(seed)
    x = stream.normals(n)
    noise = stream.normals(n)
    return DataPair(x, rho * x + math.sqrt(1.0 - rho * rho) * noise)


def gen_contaminated(
    n: int, rho: float, kind: OutlierKind, fraction: float, seed: int
) -> DataPair:
    """Pair with floor(fraction * n) samples replaced by the outlier model.

    With fraction = 0 this is bit-identical to :func:`gen_pair`.  The clean
    draws always come first in the stream, so changing only the fraction
    keeps the underlying clean sample fixed.
    """
    if not 0.0 <= fraction <= 0.5:
        raise ValueError(f"fraction must lie in [0, 0.5], got {fraction}")
    stream = Stream(seed)
    x = stream.normals(n)
    noise = stream.normals(n)
    y = rho * x + math.sqrt(1.0 - rho * rho) * noise
    count = int(fraction * n)
    if fraction > 0.0 and count < 1:
        raise ValueError(f"fraction {fraction} selects no samples at n={n}")
    if count:
        idx = stream.permutation(n)[:count]
        if kind.kind == "high_variance":
            g1 = stream.normals(count)
            g2 = stream.normals(count)
            x[idx] = kind.sd_outlier * g1
            y[idx] = kind.sd_outlier * (rho * g1 + math.sqrt(1.0 - rho * rho) * g2)
        elif kind.kind == "univariate":
            x[idx] += kind.magnitude
        else:
            x[idx] += kind.magnitude
            y[idx] += kind.magnitude
    return DataPair(x, y)


def _map_ordered(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _battery_columns(design, rep: int) -> tuple[np.ndarray, np.ndarray, int, int]:
    """Generate one repetition's battery; returns (X, y, m_true, base_seed)."""
    base = derive(design.seed, rep)
    n = design.n
    y = Stream(derive(base, _KEY_TARGET)).normals(n)
    if isinstance(design, NullBattery):
        m_true, m_null = 0, design.m
        rho = 0.0
    else:
        m_true, m_null = design.m_true, design.m_null
        rho = design.rho
    m = m_true + m_null
    X = np.empty((m, n))
    mix = math.sqrt(1.0 - rho * rho)
    for j in range(m):
        g = Stream(derive(base, j + 1)).normals(n)
        X[j] = rho * y + mix * g if j < m_true else g
    return X, y, m_true, base


def _classical_stats(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-column Pearson r and exact two-sided p against the shared y."""
    n = y.shape[0]
    df = n - 2
    Xc = X - X.mean(axis=1, keepdims=True)
    yc = y - y.mean()
    sxy = Xc @ yc
    sxx = (Xc * Xc).sum(axis=1)
    syy = float(np.dot(yc, yc))
    r = np.clip(sxy / np.sqrt(sxx * syy), -1.0, 1.0)
    one_minus_r2 = np.maximum(0.0, (sxx * syy - sxy * sxy) / (sxx * syy))
    p = np.empty_like(r)
    for j in range(r.shape[0]):
        if one_minus_r2[j] == 0.0:
            p[j] = 0.0
        else:
            p[j] = student_t_sf_two_sided(r[j] * r[j] * df / one_minus_r2[j], df)
    return r, np.minimum(1.0, p)


BATTERY_METHODS = (
    "uncorrected",
    "holm",
    "bh",
    "perm",
    "perm_max",
    "dcal",
    "pcal_sellke",
    "pcal_bickel",
    "ppbf",
)

PAIR_METHODS = ("uncorrected", "dcal", "pcal_sellke", "pcal_bickel", "ppbf")


def _check_methods(methods: Iterable[str], allowed: tuple[str, ...]) -> list[str]:
    out = list(methods)
    if not out:
        raise ValueError("methods must be nonempty")
    for name in out:
        if name not in allowed:
            raise ValueError(f"unknown method {name!r} (choose from {', '.join(allowed)})")
    return out


def _battery_scores(
    X: np.ndarray,
    y: np.ndarray,
    methods: list[str],
    base: int,
    alpha: float,
    scheme: OosScheme,
    plan: PermutationPlan,
    fast: bool,
) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per-method (score, estimate) vectors; reject where score < alpha."""
    r, p = _classical_stats(X, y)
    out: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    perm_cache: tuple[np.ndarray, np.ndarray] | None = None
    for method in methods:
        if method == "uncorrected":
            out[method] = (p, r)
        elif method == "holm":
            out[method] = (holm_adjust(p), r)
        elif method == "bh":
            out[method] = (bh_adjust(p), r)
        elif method in ("perm", "perm_max"):
            if perm_cache is None:
                perm_cache = permutation_pvalues(
                    X, y, PermutationPlan(plan.n_permutations, derive(base, _KEY_PERM))
                )
            out[method] = (perm_cache[0] if method == "perm" else perm_cache[1], r)
        elif method == "dcal":
            scores = np.empty(X.shape[0])
            estimates = np.empty(X.shape[0])
            for j in range(X.shape[0]):
                res = dcal_test(
                    DataPair(X[j], y),
                    alpha=alpha,
                    fast=fast,
                    scheme=scheme.reseeded(derive(base, _KEY_SCHEME + j)),
                )
                scores[j] = res.p_dcal
                estimates[j] = res.r_dcal
            out[method] = (scores, estimates)
        elif method == "pcal_sellke":
            out[method] = (np.array([pcal_sellke(v) for v in p]), r)
        elif method == "pcal_bickel":
            out[method] = (np.array([pcal_bickel(v) for v in p]), r)
        elif method == "ppbf":
            scores = np.array(
                [1.0 - bf_to_posterior(correlation_bf(DataPair(X[j], y))) for j in range(X.shape[0])]
            )
            out[method] = (scores, r)
    return out


class _Accumulator:
    """Sums per-method rejection and estimate statistics across repetitions."""

    def __init__(self, methods: list[str]):
        self.methods = methods
        self.reps = 0
        self.reject_true = {m: 0 for m in methods}
        self.reject_null = {m: 0 for m in methods}
        self.reps_with_false_positive = {m: 0 for m in methods}
        self.sum_est = {m: 0.0 for m in methods}
        self.count_est = {m: 0 for m in methods}
        self.sum_est_sig = {m: 0.0 for m in methods}
        self.count_sig = {m: 0 for m in methods}

    def add(self, scores: dict, m_true: int, alpha: float) -> None:
        self.reps += 1
        for method, (score, estimate) in scores.items():
            sig = score < alpha
            self.reject_true[method] += int(sig[:m_true].sum())
            null_hits = int(sig[m_true:].sum())
            self.reject_null[method] += null_hits
            self.reps_with_false_positive[method] += null_hits > 0
            self.sum_est[method] += float(estimate.sum())
            self.count_est[method] += estimate.size
            self.sum_est_sig[method] += float(estimate[sig].sum())
            self.count_sig[method] += int(sig.sum())

    def emit(self, report: ExperimentReport, design_name: str, cell: str, m_true: int, m_null: int):
        for method in self.methods:
            rejected = self.reject_true[method] + self.reject_null[method]
            report.add(design_name, cell, method, "rejections_mean", rejected / self.reps)
            if m_null:
                report.add(
                    design_name, cell, method, "fpr",
                    self.reject_null[method] / (m_null * self.reps),
                )
                report.add(
                    design_name, cell, method, "fwer",
                    self.reps_with_false_positive[method] / self.reps,
                )
            if m_true:
                report.add(
                    design_name, cell, method, "sensitivity",
                    self.reject_true[method] / (m_true * self.reps),
                )
            report.add(
                design_name, cell, method, "mean_r_overall",
                self.sum_est[method] / self.count_est[method],
            )
            mean_sig = (
                self.sum_est_sig[method] / self.count_sig[method]
                if self.count_sig[method]
                else None
            )
            report.add(design_name, cell, method, "mean_r_significant", mean_sig)


def run_battery_experiment(
    design: NullBattery | CorrelatedBattery,
    methods: Iterable[str] = ("uncorrected", "holm", "bh", "dcal"),
    alpha: float = 0.05,
    repetitions: int = 1,
    scheme: OosScheme = OosScheme.loo(),
    plan: PermutationPlan = PermutationPlan(),
    fast: bool = False,
    threads: int = 1,
) -> ExperimentReport:
    """Generate batteries, run every method, and aggregate rejection counts.

    The calibrated test runs without any additional correction; its score is
    p_dcal itself.  Repetitions that abort with a toolkit error are excluded
    from the averages and counted in the report metadata.
    """
    methods = _check_methods(methods, BATTERY_METHODS)
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")

    def one_rep(rep: int):
        try:
            X, y, m_true, base = _battery_columns(design, rep)
            return _battery_scores(X, y, methods, base, alpha, scheme, plan, fast), m_true
        except DcalError:
            return None

    results = _map_ordered(one_rep, range(repetitions), threads)
    acc = _Accumulator(methods)
    errors = 0
    m_true = design.m_true if isinstance(design, CorrelatedBattery) else 0
    m_null = design.m_null if isinstance(design, CorrelatedBattery) else design.m
    for item in results:
        if item is None:
            errors += 1
        else:
            acc.add(item[0], item[1], alpha)
    if acc.reps == 0:
        raise DcalError("every repetition failed")

    if isinstance(design, NullBattery):
        name, cell = "null_battery", f"m={design.m},n={design.n}"
    else:
        name = "correlated_battery"
        cell = f"m_true={design.m_true},m_null={design.m_null},rho={design.rho},n={design.n}"
    report = ExperimentReport(
        meta={
            "design": name,
            "cell": cell,
            "alpha": alpha,
            "seed": design.seed,
            "repetitions_requested": repetitions,
            "repetitions_completed": acc.reps,
            "errors": errors,
            "methods": methods,
            "scheme": scheme.label,
            "n_permutations": plan.n_permutations,
            "fast": fast,
        }
    )
    acc.emit(report, name, cell, m_true, m_null)
    return report


def run_oos_comparison(
    design: NullBattery | CorrelatedBattery,
    schemes: Iterable[OosScheme],
    alpha: float = 0.05,
    repetitions: int = 1,
    threads: int = 1,
) -> ExperimentReport:
    """Same battery, calibrated test only, one method entry per OOS scheme."""
    schemes = list(schemes)
    if not schemes:
        raise ValueError("schemes must be nonempty")

    def one_rep(rep: int):
        try:
            X, y, m_true, base = _battery_columns(design, rep)
            scores = {}
            for scheme in schemes:
                ss = np.empty(X.shape[0])
                ee = np.empty(X.shape[0])
                for j in range(X.shape[0]):
                    res = dcal_test(
                        DataPair(X[j], y),
                        alpha=alpha,
                        fast=False,
                        scheme=scheme.reseeded(derive(base, _KEY_SCHEME + j)),
                    )
                    ss[j] = res.p_dcal
                    ee[j] = res.r_dcal
                scores[f"dcal-{scheme.label}"] = (ss, ee)
            return scores, m_true
        except DcalError:
            return None

    labels = [f"dcal-{s.label}" for s in schemes]
    results = _map_ordered(one_rep, range(repetitions), threads)
    acc = _Accumulator(labels)
    errors = 0
    for item in results:
        if item is None:
            errors += 1
        else:
            acc.add(item[0], item[1], alpha)
    if acc.reps == 0:
        raise DcalError("every repetition failed")

    if isinstance(design, NullBattery):
        name, cell = "oos_comparison", f"m={design.m},n={design.n}"
        m_true, m_null = 0, design.m
    else:
        name = "oos_comparison"
        cell = f"m_true={design.m_true},m_null={design.m_null},rho={design.rho},n={design.n}"
        m_true, m_null = design.m_true, design.m_null
    report = ExperimentReport(
        meta={
            "design": name,
            "cell": cell,
            "alpha": alpha,
            "seed": design.seed,
            "repetitions_requested": repetitions,
            "repetitions_completed": acc.reps,
            "errors": errors,
            "methods": labels,
        }
    )
    acc.emit(report, name, cell, m_true, m_null)
    return report


def run_effect_grid(
    design: EffectGrid,
    methods: Iterable[str] = PAIR_METHODS,
    alpha: float = 0.05,
    repetitions: int = 100,
    threads: int = 1,
) -> ExperimentReport:
    """Single-pair sweep over (rho, n) cells; means of scores and estimates.

    The calibrated test runs with the fast guard off so the full p_dcal
    distribution is observed, not just its rejections.
    """
    methods = _check_methods(methods, PAIR_METHODS)
    cells = [(rho, n) for rho in design.rho_list for n in design.n_list]

    def one_cell(args):
        ci, (rho, n) = args
        sums = {m: [0.0, 0.0, 0.0, 0] for m in methods}  # score, est, |est|, rejections
        for rep in range(repetitions):
            pair = gen_pair(n, rho, derive(design.seed, ci, rep))
            classical = pearson(pair)
            per_method = {"uncorrected": (classical.p, classical.r)}
            if "dcal" in sums:
                res = dcal_test(pair, alpha=alpha, fast=False, scheme=OosScheme.loo())
                per_method["dcal"] = (res.p_dcal, res.r_dcal)
            if "pcal_sellke" in sums:
                per_method["pcal_sellke"] = (pcal_sellke(classical.p), classical.r)
            if "pcal_bickel" in sums:
                per_method["pcal_bickel"] = (pcal_bickel(classical.p), classical.r)
            if "ppbf" in sums:
                per_method["ppbf"] = (1.0 - bf_to_posterior(correlation_bf(pair)), classical.r)
            for m in methods:
                score, est = per_method[m]
                sums[m][0] += score
                sums[m][1] += est
                sums[m][2] += abs(est)
                sums[m][3] += score < alpha
        return sums

    results = _map_ordered(one_cell, list(enumerate(cells)), threads)
    report = ExperimentReport(
        meta={
            "design": "effect_grid",
            "alpha": alpha,
            "seed": design.seed,
            "repetitions": repetitions,
            "methods": methods,
            "rho_list": list(design.rho_list),
            "n_list": list(design.n_list),
        }
    )
    for (rho, n), sums in zip(cells, results):
        cell = f"rho={rho},n={n}"
        for m in methods:
            score_sum, est_sum, abs_sum, rejected = sums[m]
            report.add("effect_grid", cell, m, "mean_p", score_sum / repetitions)
            report.add("effect_grid", cell, m, "mean_estimate", est_sum / repetitions)
            report.add("effect_grid", cell, m, "mean_abs_estimate", abs_sum / repetitions)
            report.add("effect_grid", cell, m, "rejection_rate", rejected / repetitions)
    return report


def run_outlier_suite(
    cells: Sequence[Contaminated],
    methods: Iterable[str] = ("pearson", "dcal", "skipped"),
    alpha: float = 0.05,
    repetitions: int = 100,
    threads: int = 1,
) -> ExperimentReport:
    """Contaminated-pair sweep comparing classical, calibrated, and skipped."""
    methods = list(methods)
    for name in methods:
        if name not in ("pearson", "dcal", "skipped"):
            raise ValueError(f"unknown outlier-suite method {name!r}")

    def one_cell(args):
        ci, cell = args
        sums = {m: [0.0, 0.0, 0] for m in methods}  # est, est among sig, n sig
        errors = 0
        for rep in range(repetitions):
            pair = gen_contaminated(
                cell.n, cell.rho, cell.outlier, cell.fraction, derive(cell.seed, ci, rep)
            )
            try:
                per_method = {}
                if "pearson" in sums:
                    res = pearson(pair)
                    per_method["pearson"] = (res.p, res.r)
                if "dcal" in sums:
                    res = dcal_test(pair, alpha=alpha, fast=False)
                    per_method["dcal"] = (res.p_dcal, res.r_dcal)
                if "skipped" in sums:
                    res = skipped_correlation(pair)
                    per_method["skipped"] = (res.p, res.r)
            except DcalError:
                errors += 1
                continue
            for m in methods:
                score, est = per_method[m]
                sums[m][0] += est
                if score < alpha:
                    sums[m][1] += est
                    sums[m][2] += 1
        return sums, errors

    results = _map_ordered(one_cell, list(enumerate(cells)), threads)
    report = ExperimentReport(
        meta={
            "design": "outlier_suite",
            "alpha": alpha,
            "repetitions": repetitions,
            "methods": methods,
            "errors": sum(err for _, err in results),
        }
    )
    for cell_design, (sums, errors) in zip(cells, results):
        kind = cell_design.outlier
        extra = (
            f",sd={kind.sd_outlier}" if kind.kind == "high_variance" else f",mag={kind.magnitude}"
        )
        cell = (
            f"kind={kind.kind},rho={cell_design.rho},fraction={cell_design.fraction}"
            f",n={cell_design.n}{extra}"
        )
        done = repetitions - errors
        for m in methods:
            est_sum, est_sig_sum, n_sig = sums[m]
            report.add("outlier_suite", cell, m, "mean_estimate", est_sum / done)
            report.add(
                "outlier_suite", cell, m, "mean_estimate_significant",
                est_sig_sum / n_sig if n_sig else None,
            )
            report.add("outlier_suite", cell, m, "sensitivity", n_sig / done)
    return report
