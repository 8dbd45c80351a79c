"""Calibrated correlation testing toolkit.

The core operation replaces each observation with its out-of-sample
prediction under the fitted linear relationship and applies the classical
correlation test to the predictions, yielding a calibrated (r, p) pair whose
p-value holds up under large test batteries without additional correction.
Comparison baselines (p-value calibrations, multiple-testing corrections,
a correlation Bayes factor, and skipped correlation) plus a seeded
simulation harness and a screening CLI round out the package.
"""

from .calibration import bf_to_posterior, correlation_bf, pcal_bickel, pcal_sellke
from .core import CorrelationResult, DataPair, OlsFit, loo_predictions, ols_fit, pearson
from .engine import (
    DcalResult,
    OosScheme,
    X_FROM_Y,
    Y_FROM_X,
    dcal_in_sample_check,
    dcal_test,
    oos_predict,
)
from .errors import (
    ConvergenceError,
    DcalError,
    DegenerateGeometryError,
    DegenerateVarianceError,
    InsufficientDataError,
    ParseError,
    ResampleCoverageError,
    TargetError,
    UndefinedSignError,
)
from .batchio import FeatureMatrix, FeatureRow, ScreenReport, load_matrix, screen, write_report
from .multitest import PermutationPlan, bh_adjust, holm_adjust, perm_test, permutation_pvalues
from .robust import SkippedResult, detect_bivariate_outliers, skipped_correlation
from .simulate import (
    Contaminated,
    CorrelatedBattery,
    EffectGrid,
    ExperimentReport,
    NullBattery,
    OutlierKind,
    gen_contaminated,
    gen_pair,
    run_battery_experiment,
    run_effect_grid,
    run_oos_comparison,
    run_outlier_suite,
)
from .special import regularized_incomplete_beta, student_t_cdf

__version__ = "0.1.0"

__all__ = [
    "DataPair",
    "CorrelationResult",
    "OlsFit",
    "pearson",
    "ols_fit",
    "loo_predictions",
    "student_t_cdf",
    "regularized_incomplete_beta",
    "OosScheme",
    "DcalResult",
    "Y_FROM_X",
    "X_FROM_Y",
    "oos_predict",
    "dcal_test",
    "dcal_in_sample_check",
    "pcal_sellke",
    "pcal_bickel",
    "bf_to_posterior",
    "correlation_bf",
    "PermutationPlan",
    "holm_adjust",
    "bh_adjust",
    "perm_test",
    "permutation_pvalues",
    "SkippedResult",
    "detect_bivariate_outliers",
    "skipped_correlation",
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
    "FeatureMatrix",
    "FeatureRow",
    "ScreenReport",
    "load_matrix",
    "screen",
    "write_report",
    "DcalError",
    "DegenerateVarianceError",
    "DegenerateGeometryError",
    "InsufficientDataError",
    "ResampleCoverageError",
    "UndefinedSignError",
    "ConvergenceError",
    "ParseError",
    "TargetError",
]
