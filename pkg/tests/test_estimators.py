import numpy as np
import pytest
from sklearn.base import clone

from semitreat.classic import diff_means
from semitreat.estimators import (
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


@pytest.fixture(scope="module")
def yz():
    r = np.random.default_rng(42)
    z = np.repeat([0, 1], 1500)
    y = r.standard_t(3, size=3000) + 0.4 * z
    return y, z


@pytest.mark.parametrize("name", ESTIMATOR_NAMES)
def test_registry_runs(normal_view, name):
    e, ci = estimate_with_ci(normal_view, name)
    assert ci.lo <= e.tau_hat <= ci.hi
    assert abs(e.tau_hat) < 0.2


def test_registry_unknown(normal_view):
    with pytest.raises(ValueError):
        run_estimator(normal_view, "mean")
    with pytest.raises(ValueError):
        estimate_with_ci(normal_view, "means", ci="jackknife")


def test_bootstrap_ci(normal_view):
    e, ci = estimate_with_ci(normal_view, "medians", ci="bootstrap", boot_m=1000, boot_B=60, seed=1)
    assert ci.source == "bootstrap" and e.diagnostics["variance_source"] == "bootstrap"
    assert e.diagnostics["boot_B"] == 60
    assert e.var_hat > 0


@pytest.mark.parametrize(
    "est",
    [
        DiffInMeans(),
        DiffInMedians(shared=True),
        HodgesLehmann(variance="analytic"),
        AdaptiveTrimmedMean(mode="symmetric"),
        AdaptiveWinsorizedMean(alpha1=0.3),
        EfficientScoreEstimator(mode="onestep"),
        WeightedQuantileEstimator(),
        ParametricEffect(info="hessian"),
    ],
)
def test_sklearn_interface(yz, est):
    y, z = yz
    fitted = clone(est).fit(y, z)
    assert np.isfinite(fitted.tau_) and fitted.var_ > 0
    assert fitted.se_ == pytest.approx(np.sqrt(fitted.var_))
    ci = fitted.confint(0.9)
    assert ci.lo < fitted.tau_ < ci.hi
    assert abs(fitted.tau_ - 0.4) < 0.3
    params = est.get_params()
    assert clone(est).get_params() == params


def test_fitted_attributes(yz):
    y, z = yz
    t = AdaptiveTrimmedMean().fit(y, z)
    assert 0 <= t.alpha_ < 0.5 and 0 <= t.beta_ < 0.5
    w = WeightedQuantileEstimator().fit(y, z)
    assert abs(w.weights_.w.sum() - 1) < 1e-12
    p = ParametricEffect().fit(y, z)
    assert p.theta_ == p.tau_
    m = DiffInMeans().fit(y, z)
    assert m.tau_ == diff_means(m.view_).tau_hat


def test_confint_requires_fit():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        DiffInMeans().confint()


def test_set_params_roundtrip(yz):
    y, z = yz
    e = EfficientScoreEstimator().set_params(split=True, seed=3)
    assert e.fit(y, z).estimate_.diagnostics["split"] is True
