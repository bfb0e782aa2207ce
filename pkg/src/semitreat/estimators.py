"""Estimator registry and scikit-learn style wrappers.

The registry maps the short names used by the command line tool and the
simulation harness to functions of a :class:`TwoSampleView`. The classes
wrap the same functions behind ``fit(y, z)`` so that they can be configured,
cloned and inspected like scikit-learn estimators.
"""

from __future__ import annotations

from typing import Any

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted, column_or_1d

from .classic import diff_means, diff_medians, hl_point, hodges_lehmann
from .inference import ConfidenceInterval, m_of_n_bootstrap_var, normal_ci
from .parametric import get_model, one_step_theta, quantile_match_init
from .sample import Estimate, TwoSampleView, empirical_quantile, split_sample
from .shift import eif_estimate, waq_estimate
from .trimming import adapt_trim

__all__ = [
    "ESTIMATOR_NAMES",
    "run_estimator",
    "estimate_with_ci",
    "DiffInMeans",
    "DiffInMedians",
    "HodgesLehmann",
    "AdaptiveTrimmedMean",
    "AdaptiveWinsorizedMean",
    "EfficientScoreEstimator",
    "WeightedQuantileEstimator",
    "ParametricEffect",
]

ESTIMATOR_NAMES = ("means", "medians", "hl", "trim", "wins", "eif", "waq")

DEFAULTS: dict[str, Any] = {
    "trim_mode": "asymmetric",
    "trim_range": (0.0, 0.495),
    "split": False,
    "eif_mode": "root",
    "seed": 0,
    "hl_variance": "analytic",
    "boot_m": 2000,
    "boot_B": 200,
}


def _opts(options: dict) -> dict:
    out = dict(DEFAULTS)
    out.update({k: v for k, v in options.items() if v is not None})
    return out


def _run(view: TwoSampleView, name: str, o: dict, *, with_variance: bool = True) -> Estimate:
    if name == "means":
        return diff_means(view)
    if name == "medians":
        if not with_variance:
            tau = empirical_quantile(view.treated, 0.5) - empirical_quantile(view.control, 0.5)
            return Estimate(tau, None, "medians")
        return diff_medians(view)
    if name == "hl":
        if not with_variance:
            return Estimate(hl_point(view.treated, view.control), None, "hl")
        return hodges_lehmann(
            view, variance=o["hl_variance"], boot_m=min(o["boot_m"], view.n),
            boot_B=o["boot_B"], seed=o["seed"],
        )
    if name in ("trim", "wins"):
        a0, a1 = o["trim_range"]
        return adapt_trim(view, a0, a1, o["trim_mode"], name)
    if name == "eif":
        return eif_estimate(view, split=o["split"], mode=o["eif_mode"], seed=o["seed"])
    if name == "waq":
        return waq_estimate(view, split=o["split"], seed=o["seed"])
    raise ValueError(f"unknown estimator {name!r}; choose from {', '.join(ESTIMATOR_NAMES)}")


def run_estimator(view: TwoSampleView, name: str, **options) -> Estimate:
    """Run a registered estimator by name.

    Options are ``trim_mode``, ``trim_range``, ``split``, ``eif_mode``,
    ``seed``, ``hl_variance``, ``boot_m`` and ``boot_B``; omitted ones take
    the defaults in :data:`DEFAULTS`.
    """
    return _run(view, name, _opts(options))


def estimate_with_ci(
    view: TwoSampleView,
    name: str,
    ci: str = "analytic",
    level: float = 0.95,
    **options,
) -> tuple[Estimate, ConfidenceInterval]:
    """Estimate plus a normal interval from the analytic or bootstrap variance."""
    o = _opts(options)
    if ci == "analytic":
        est = _run(view, name, o)
        return est, normal_ci(est, level, "analytic")
    if ci != "bootstrap":
        raise ValueError(f"ci must be 'analytic' or 'bootstrap', got {ci!r}")
    est = _run(view, name, o, with_variance=name in ("trim", "wins"))
    m = min(int(o["boot_m"]), view.n)
    var = m_of_n_bootstrap_var(
        view, lambda v: _run(v, name, o, with_variance=False), m=m, B=int(o["boot_B"]), seed=o["seed"]
    )
    est.diagnostics.update(variance_source="bootstrap", boot_m=m, boot_B=int(o["boot_B"]))
    if est.var_hat is not None:
        est.diagnostics["analytic_var"] = est.var_hat
    est.var_hat = var
    return est, normal_ci(est, level, "bootstrap")


class _TwoSampleEstimator(BaseEstimator):
    """Common ``fit`` and interval logic."""

    def _estimate(self, view: TwoSampleView) -> Estimate:
        raise NotImplementedError

    def fit(self, y, z):
        """Fit on outcomes `y` and treatment indicators `z` (0 or 1)."""
        y = column_or_1d(np.asarray(y, dtype=float))
        z = column_or_1d(np.asarray(z))
        self.view_ = split_sample(y, z)
        est = self._estimate(self.view_)
        self.estimate_ = est
        self.tau_ = est.tau_hat
        self.var_ = est.var_hat
        self.se_ = est.se
        return self

    def confint(self, level: float = 0.95) -> ConfidenceInterval:
        check_is_fitted(self, "estimate_")
        return normal_ci(self.estimate_, level)


class DiffInMeans(_TwoSampleEstimator):
    def _estimate(self, view):
        return diff_means(view)


class DiffInMedians(_TwoSampleEstimator):
    """Difference in medians; ``shared=True`` uses one control density fit."""

    def __init__(self, shared: bool = False):
        self.shared = shared

    def _estimate(self, view):
        return diff_medians(view, shared=self.shared)


class HodgesLehmann(_TwoSampleEstimator):
    def __init__(self, variance: str = "bootstrap", boot_m: int | None = None, boot_B: int = 200, seed: int = 0):
        self.variance = variance
        self.boot_m = boot_m
        self.boot_B = boot_B
        self.seed = seed

    def _estimate(self, view):
        return hodges_lehmann(view, variance=self.variance, boot_m=self.boot_m, boot_B=self.boot_B, seed=self.seed)


class AdaptiveTrimmedMean(_TwoSampleEstimator):
    """Trimmed mean difference with variance-minimizing trim fractions.

    Parameters
    ----------
    alpha0, alpha1 : float
        Search range for each trim fraction.
    mode : {"asymmetric", "symmetric", "right"}
    """

    _kind = "trim"

    def __init__(self, alpha0: float = 0.0, alpha1: float = 0.495, mode: str = "asymmetric"):
        self.alpha0 = alpha0
        self.alpha1 = alpha1
        self.mode = mode

    def _estimate(self, view):
        est = adapt_trim(view, self.alpha0, self.alpha1, self.mode, self._kind)
        self.alpha_ = est.diagnostics["alpha_hat"]
        self.beta_ = est.diagnostics["beta_hat"]
        return est


class AdaptiveWinsorizedMean(AdaptiveTrimmedMean):
    _kind = "wins"


class EfficientScoreEstimator(_TwoSampleEstimator):
    """Shift estimator solving the estimated efficient score equation."""

    def __init__(self, mode: str = "root", split: bool = False, seed: int = 0):
        self.mode = mode
        self.split = split
        self.seed = seed

    def _estimate(self, view):
        return eif_estimate(view, split=self.split, mode=self.mode, seed=self.seed)


class WeightedQuantileEstimator(_TwoSampleEstimator):
    """Weighted average of quantile differences with estimated efficient weights."""

    def __init__(self, split: bool = False, seed: int = 0):
        self.split = split
        self.seed = seed

    def _estimate(self, view):
        est = waq_estimate(view, split=self.split, seed=self.seed)
        if "weights" in est.diagnostics:
            self.weights_ = est.diagnostics["weights"]
        return est


class ParametricEffect(_TwoSampleEstimator):
    """One-step estimate of ``theta`` in ``Y(1) = h(Y(0), theta)``.

    Parameters
    ----------
    model : {"additive", "multiplicative"} or TreatmentModel
    u_init : sequence of float
        Quantile levels for the starting value, one per parameter.
    info : {"score", "hessian"}
    """

    def __init__(self, model="additive", u_init=(0.5,), info: str = "score", split: bool = False, seed: int = 0):
        self.model = model
        self.u_init = u_init
        self.info = info
        self.split = split
        self.seed = seed

    def _estimate(self, view):
        model = get_model(self.model) if isinstance(self.model, str) else self.model
        theta0 = quantile_match_init(view, model, self.u_init)
        est = one_step_theta(view, theta0, model, self.split, self.seed, info=self.info)
        self.theta_ = est.diagnostics.get("theta", est.tau_hat)
        return est

