"""Semiparametric estimation of treatment effects in randomized experiments.

The package estimates a constant or parametric treatment effect from two
independent samples. Estimators range from the difference in means to
adaptive trimmed means and efficient score and weighted quantile methods
built on an adaptive kernel density estimate of the control outcome law.
"""

from .classic import diff_means, diff_medians, hl_point, hodges_lehmann
from .density import DensityFit, eval_density, eval_lpsi, fit_adaptive_density
from .estimators import (
    ESTIMATOR_NAMES,
    AdaptiveTrimmedMean,
    AdaptiveWinsorizedMean,
    DiffInMeans,
    DiffInMedians,
    EfficientScoreEstimator,
    HodgesLehmann,
    ParametricEffect,
    WeightedQuantileEstimator,
    estimate_with_ci,
    run_estimator,
)
from .exceptions import EstimationError, InputError, SemitreatError
from .inference import ConfidenceInterval, m_of_n_bootstrap_var, normal_ci
from .laws import Cauchy, ExtendedHuber, Laplace, Normal, get_law
from .parametric import (
    TreatmentModel,
    additive_model,
    in_sample_ate,
    level_from_log,
    multiplicative_model,
    one_step_theta,
    population_ate,
)
from .sample import Estimate, TwoSampleView, empirical_quantile, from_arms, split_sample
from .shift import eif_estimate, waq_estimate, waq_weights
from .simulation import (
    ScenarioSpec,
    efficiency_bound,
    run_scenario,
    sigma_f2_quadrature,
)
from .trimming import TrimSpec, adapt_trim, sigma2_hat, trimmed_tau, winsorized_tau

__version__ = "0.1.0"

__all__ = [
    "ESTIMATOR_NAMES",
    "AdaptiveTrimmedMean",
    "AdaptiveWinsorizedMean",
    "Cauchy",
    "ConfidenceInterval",
    "DensityFit",
    "DiffInMeans",
    "DiffInMedians",
    "EfficientScoreEstimator",
    "Estimate",
    "EstimationError",
    "ExtendedHuber",
    "HodgesLehmann",
    "InputError",
    "Laplace",
    "Normal",
    "ParametricEffect",
    "ScenarioSpec",
    "SemitreatError",
    "TreatmentModel",
    "TrimSpec",
    "TwoSampleView",
    "WeightedQuantileEstimator",
    "adapt_trim",
    "additive_model",
    "diff_means",
    "diff_medians",
    "efficiency_bound",
    "eif_estimate",
    "empirical_quantile",
    "estimate_with_ci",
    "eval_density",
    "eval_lpsi",
    "fit_adaptive_density",
    "from_arms",
    "get_law",
    "hl_point",
    "hodges_lehmann",
    "in_sample_ate",
    "level_from_log",
    "m_of_n_bootstrap_var",
    "multiplicative_model",
    "normal_ci",
    "one_step_theta",
    "population_ate",
    "run_estimator",
    "run_scenario",
    "sigma2_hat",
    "sigma_f2_quadrature",
    "split_sample",
    "trimmed_tau",
    "waq_estimate",
    "waq_weights",
    "winsorized_tau",
]
