"""Differentially private Theil-Sen estimators and confidence intervals for simple linear regression."""

__version__ = "0.1.0"

from .core import (
    Dataset,
    DatasetError,
    Matching,
    all_pairs_slopes,
    match_bins,
    partition_and_permute,
    slope,
    sorted_half_slopes,
)
from .dpwide import (
    PiecewiseDensity,
    QuantileQuery,
    QueryError,
    clamp_slopes,
    dpwide_sample,
    exact_density,
    widened_utility,
)
from .estimators import (
    EstimationError,
    FitResult,
    Variant,
    dp_theil_sen,
    dp_theil_sen_k_half,
    ols_fit,
    theil_sen,
    theil_sen_half,
)
from .intervals import ConfidenceInterval, IntervalError, dp_theil_sen_ci, normal_quantile
from .bounds import BoundParams, BoundResult, bound_table, convergence_bound, suggest_theta, suggest_theta_terms, tau
from .sim import PrivacySetting, SimConfig, SimReport, XDesign, empirical_convergence, generate_dataset, run_trials
