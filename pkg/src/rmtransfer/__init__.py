"""Closed-form ridge transfer classifiers and their high-dimensional
performance theory, with a Monte Carlo experiment harness.

Layers:

* :mod:`rmtransfer.gmm` - synthetic two-class Gaussian mixture tasks;
* :mod:`rmtransfer.ridge` - closed-form training, alpha-scaled fine-tuning,
  evaluation;
* :mod:`rmtransfer.theory` - scalar fixed points, decision-function
  statistics, accuracy, optimal/worst scaling, arbitrary-source variants;
* :mod:`rmtransfer.multisource` - mixing-vector objective and solver;
* :mod:`rmtransfer.identities` - closed-form vs explicit-matrix validation;
* :mod:`rmtransfer.estimation` - data-driven spec estimation and plug-in
  optimal scaling;
* :mod:`rmtransfer.harness` / :mod:`rmtransfer.cli` - experiment runners.
"""

from .errors import ConvergenceError, DegenerateSpecError, RegimeError
from .gmm import (
    LabeledDataset,
    MeanPair,
    MixingMode,
    make_orthogonal_means,
    mu_beta,
    sample_class_data,
    substream,
)
from .ridge import (
    LinearClassifier,
    decision_scores,
    empirical_accuracy,
    fine_tune,
    fine_tune_multi,
    train_ridge,
)
from .theory import (
    DEFAULT_T3_VARIANT,
    T3_VARIANTS,
    DecisionStats,
    ProblemSpec,
    ScalarContext,
    SourceSummary,
    build_context,
    decision_stats,
    decision_stats_arbitrary,
    delta_fixed_point,
    det_equiv_matrices,
    gaussian_upper_tail,
    optimal_alpha,
    optimal_alpha_arbitrary,
    ridge_source_summary,
    theoretical_accuracy,
    worst_alpha,
    worst_alpha_arbitrary,
)
from .multisource import MultiSourceCoeffs, multi_source_coeffs, solve_multi_alpha
from .estimation import EstimatedSpec, estimate_spec, plugin_optimal_alpha, standardize

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DegenerateSpecError",
    "RegimeError",
    "LabeledDataset",
    "MeanPair",
    "MixingMode",
    "make_orthogonal_means",
    "mu_beta",
    "sample_class_data",
    "substream",
    "LinearClassifier",
    "decision_scores",
    "empirical_accuracy",
    "fine_tune",
    "fine_tune_multi",
    "train_ridge",
    "DEFAULT_T3_VARIANT",
    "T3_VARIANTS",
    "DecisionStats",
    "ProblemSpec",
    "ScalarContext",
    "SourceSummary",
    "build_context",
    "decision_stats",
    "decision_stats_arbitrary",
    "delta_fixed_point",
    "det_equiv_matrices",
    "gaussian_upper_tail",
    "optimal_alpha",
    "optimal_alpha_arbitrary",
    "ridge_source_summary",
    "theoretical_accuracy",
    "worst_alpha",
    "worst_alpha_arbitrary",
    "MultiSourceCoeffs",
    "multi_source_coeffs",
    "solve_multi_alpha",
    "EstimatedSpec",
    "estimate_spec",
    "plugin_optimal_alpha",
    "standardize",
    "__version__",
]
