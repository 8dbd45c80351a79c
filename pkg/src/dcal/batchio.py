"""Feature-matrix ingestion and batch screening against one target variable.

The screening workflow mirrors the co-expression use case: load a features x
samples table, run the calibrated correlation test for every feature against
a chosen target, attach classical multiple-testing corrections over the
battery of classical p-values, and persist the per-feature report.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .core import DataPair
from .engine import OosScheme, dcal_test
from .errors import DcalError, InsufficientDataError, ParseError, TargetError
from .multitest import PermutationPlan, bh_adjust, holm_adjust, permutation_pvalues
from .rng import derive, derive_text

__all__ = [
    "FeatureMatrix",
    "FeatureRow",
    "ScreenReport",
    "load_matrix",
    "screen",
    "write_report",
    "CORRECTIONS",
]

CORRECTIONS = ("holm", "bh", "perm", "perm_max")

_MISSING_TOKENS = {"", "na", "nan", "null"}

# substream roles under the screen seed
_KEY_SCREEN_PERM = 2 ** 35


@dataclass(frozen=True)
class FeatureMatrix:
    """Dense feature-major matrix with unique feature names.

    ``warnings`` lists features excluded at ingestion (constant values, or
    missing cells under the drop policy).
    """

    feature_names: tuple[str, ...]
    values: np.ndarray
    sample_names: tuple[str, ...]
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if len(set(self.feature_names)) != len(self.feature_names):
            raise ValueError("feature names must be unique")
        if any(not name for name in self.feature_names):
            raise ValueError("feature names must be nonempty")
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[0] != len(self.feature_names):
            raise ValueError("values must be a (features x samples) matrix")
        if vals.size and not np.all(np.isfinite(vals)):
            raise ValueError("matrix contains non-finite values")
        object.__setattr__(self, "values", vals)

    @property
    def sample_count(self) -> int:
        return self.values.shape[1]

    def index_of(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise TargetError(f"feature {name!r} not found in matrix") from None


def _parse_cell(token: str, line_no: int, col_no: int) -> float | None:
    stripped = token.strip()
    if stripped.lower() in _MISSING_TOKENS:
        return None
    try:
        return float(stripped)
    except ValueError:
        raise ParseError(
            f"line {line_no}, column {col_no}: {stripped!r} is not a number"
        ) from None


def load_matrix(
    path,
    delimiter: str = ",",
    orientation: str = "features_in_rows",
    missing_policy: str = "drop_feature",
) -> FeatureMatrix:
    """Parse a delimited table into a FeatureMatrix.

    The first column holds names and the header row holds the other axis'
    identifiers; ``orientation`` says whether rows are features (default) or
    samples.  Missing cells ('', NA, NaN, null) follow ``missing_policy``:
    ``drop_feature`` removes the affected feature with a warning, ``fail``
    raises.  Constant-valued features are always excluded with a warning,
    since they cannot participate in any correlation test.
    """
    if orientation not in ("features_in_rows", "samples_in_rows"):
        raise ValueError(f"unknown orientation {orientation!r}")
    if missing_policy not in ("drop_feature", "fail"):
        raise ValueError(f"unknown missing policy {missing_policy!r}")

    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh, delimiter=delimiter))
    if not rows:
        raise ParseError(f"{path}: file is empty")
    header = rows[0]
    if len(header) < 2:
        raise ParseError(f"line 1: expected a name column plus data columns")
    width = len(header)
    axis_names = tuple(cell.strip() for cell in header[1:])

    names: list[str] = []
    data: list[list[float | None]] = []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise ParseError(f"line {line_no}: expected {width} columns, got {len(row)}")
        names.append(row[0].strip())
        data.append([_parse_cell(tok, line_no, c + 2) for c, tok in enumerate(row[1:])])

    if orientation == "features_in_rows":
        feature_names, sample_names = names, axis_names
        cells = data
    else:
        feature_names, sample_names = list(axis_names), tuple(names)
        cells = [list(col) for col in zip(*data)] if data else [[] for _ in axis_names]

    dupes = {n for n in feature_names if feature_names.count(n) > 1}
    if dupes:
        raise ParseError(f"duplicate feature name {sorted(dupes)[0]!r}")

    kept_names: list[str] = []
    kept_rows: list[list[float]] = []
    warnings: list[str] = []
    for name, row in zip(feature_names, cells):
        if any(v is None for v in row):
            if missing_policy == "fail":
                raise ParseError(f"feature {name!r} has missing values")
            warnings.append(f"feature {name!r} dropped: missing values")
            continue
        if len(row) and min(row) == max(row):
            warnings.append(f"feature {name!r} excluded: constant value")
            continue
        kept_names.append(name)
        kept_rows.append(row)

    values = np.asarray(kept_rows, dtype=np.float64) if kept_rows else np.empty((0, len(sample_names)))
    return FeatureMatrix(
        feature_names=tuple(kept_names),
        values=values,
        sample_names=tuple(sample_names),
        warnings=tuple(warnings),
    )


@dataclass(frozen=True)
class FeatureRow:
    """Per-feature screening outcome; ``error`` is set instead of numbers
    when the feature could not be tested."""

    name: str
    r: float = float("nan")
    p: float = float("nan")
    r_dcal: float = float("nan")
    p_dcal: float = float("nan")
    sign_flip: bool = False
    fast_skipped: bool = False
    adjusted: dict = field(default_factory=dict)
    error: str = ""


@dataclass
class ScreenReport:
    """Rows per screened feature plus battery-level summary counts."""

    target: str
    alpha: float
    scheme: str
    n_samples: int
    corrections: tuple[str, ...]
    rows: list[FeatureRow] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def significant_sets(self) -> dict[str, set[str]]:
        """Feature-name sets significant at alpha, per method."""
        ok = [row for row in self.rows if not row.error]
        sets = {
            "uncorrected": {r.name for r in ok if r.p < self.alpha},
            "dcal": {r.name for r in ok if r.p_dcal < self.alpha},
        }
        for corr in self.corrections:
            sets[corr] = {r.name for r in ok if r.adjusted[corr] < self.alpha}
        return sets

    def build_summary(self) -> None:
        sets = self.significant_sets()
        counts = {method: len(s) for method, s in sets.items()}
        names = sorted(sets)
        intersections = {
            f"{a}&{b}": len(sets[a] & sets[b])
            for i, a in enumerate(names)
            for b in names[i + 1 :]
        }
        self.summary = {
            "tested": sum(1 for row in self.rows if not row.error),
            "failed": sum(1 for row in self.rows if row.error),
            "fast_skipped": sum(1 for row in self.rows if row.fast_skipped),
            "significant": counts,
            "intersections": intersections,
        }


def screen(
    matrix: FeatureMatrix,
    target: str,
    alpha: float = 0.05,
    scheme: OosScheme = OosScheme.loo(),
    corrections: Iterable[str] = ("holm", "bh"),
    fast: bool = True,
    plan: PermutationPlan = PermutationPlan(),
    threads: int = 1,
    progress=None,
) -> ScreenReport:
    """Screen every non-target feature against the target.

    ``fast`` enables the calibrated test's guard, skipping out-of-sample work
    for features whose classical p is already non-significant -- the
    high-throughput mode.  Corrections are computed over the classical
    p-values of the successfully tested features only.  Per-feature failures
    are recorded in their rows, not raised.
    """
    corrections = tuple(corrections)
    for corr in corrections:
        if corr not in CORRECTIONS:
            raise ValueError(f"unknown correction {corr!r} (choose from {', '.join(CORRECTIONS)})")
    target_idx = matrix.index_of(target)
    if matrix.sample_count < 4:
        raise InsufficientDataError(f"need >= 4 samples, got {matrix.sample_count}")
    y = matrix.values[target_idx]
    if np.ptp(y) == 0.0:
        raise TargetError(f"target {target!r} is constant")

    feature_ids = [j for j in range(len(matrix.feature_names)) if j != target_idx]

    def test_one(j: int):
        name = matrix.feature_names[j]
        try:
            # per-feature seeds follow the feature NAME, so permuting matrix
            # rows permutes report rows with identical values
            res = dcal_test(
                DataPair(matrix.values[j], y),
                alpha=alpha,
                fast=fast,
                scheme=scheme.reseeded(derive_text(scheme.seed, name)),
            )
            return FeatureRow(
                name=name, r=res.r, p=res.p, r_dcal=res.r_dcal, p_dcal=res.p_dcal,
                sign_flip=res.sign_flip_triggered, fast_skipped=res.skipped_by_fast_flag,
            )
        except DcalError as exc:
            return FeatureRow(name=name, error=str(exc))

    rows: list[FeatureRow] = []
    if threads <= 1:
        for k, j in enumerate(feature_ids):
            rows.append(test_one(j))
            if progress and (k + 1) % 200 == 0:
                progress(k + 1, len(feature_ids))
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(test_one, feature_ids))
    if progress:
        progress(len(feature_ids), len(feature_ids))

    ok = [i for i, row in enumerate(rows) if not row.error]
    if ok and corrections:
        pvec = np.array([rows[i].p for i in ok])
        adjusted: dict[str, np.ndarray] = {}
        if "holm" in corrections:
            adjusted["holm"] = holm_adjust(pvec)
        if "bh" in corrections:
            adjusted["bh"] = bh_adjust(pvec)
        if "perm" in corrections or "perm_max" in corrections:
            X = np.vstack([matrix.values[feature_ids[i]] for i in ok])
            per, mx = permutation_pvalues(
                X, y, PermutationPlan(plan.n_permutations, derive(scheme.seed, _KEY_SCREEN_PERM))
            )
            adjusted["perm"] = per
            adjusted["perm_max"] = mx
        for pos, i in enumerate(ok):
            rows[i] = replace(
                rows[i],
                adjusted={corr: float(adjusted[corr][pos]) for corr in corrections},
            )

    report = ScreenReport(
        target=target,
        alpha=alpha,
        scheme=scheme.label,
        n_samples=matrix.sample_count,
        corrections=corrections,
        rows=rows,
    )
    report.build_summary()
    return report


def _format_value(v: float) -> str:
    return repr(float(v))


def write_report(report: ScreenReport, path, format: str = "csv") -> None:
    """Persist a ScreenReport as CSV (one row per feature) or JSON.

    Numbers are written with full round-trip precision, so reloading the file
    reproduces them bit for bit.
    """
    if format == "csv":
        header = ["name", "r", "p", "r_dcal", "p_dcal", "flip"]
        header += [f"p_{corr}" for corr in report.corrections]
        header += ["error"]
        lines = [",".join(header)]
        for row in report.rows:
            if row.error:
                cells = [row.name] + [""] * (len(header) - 2) + [row.error.replace(",", ";")]
            else:
                cells = [
                    row.name,
                    _format_value(row.r),
                    _format_value(row.p),
                    _format_value(row.r_dcal),
                    _format_value(row.p_dcal),
                    "true" if row.sign_flip else "false",
                ]
                cells += [_format_value(row.adjusted[corr]) for corr in report.corrections]
                cells += [""]
            lines.append(",".join(cells))
        payload = "\n".join(lines) + "\n"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(payload)
    elif format == "json":
        doc = {
            "target": report.target,
            "alpha": report.alpha,
            "scheme": report.scheme,
            "n_samples": report.n_samples,
            "corrections": list(report.corrections),
            "rows": [
                {
                    "name": row.name,
                    "r": None if row.error else row.r,
                    "p": None if row.error else row.p,
                    "r_dcal": None if row.error else row.r_dcal,
                    "p_dcal": None if row.error else row.p_dcal,
                    "flip": row.sign_flip,
                    **{f"p_{corr}": row.adjusted.get(corr) for corr in report.corrections},
                    "error": row.error,
                }
                for row in report.rows
            ],
            "summary": report.summary,
        }
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    else:
        raise ValueError(f"unknown report format {format!r}")
