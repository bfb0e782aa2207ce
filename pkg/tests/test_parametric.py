import numpy as np
import pytest

from semitreat.classic import diff_medians
from semitreat.density import eval_lpsi, fit_adaptive_density
from semitreat.exceptions import BadParamsError, DegenerateInfoError, NoSolutionError
from semitreat.parametric import (
    TreatmentModel,
    additive_model,
    get_model,
    in_sample_ate,
    info_hat,
    level_from_log,
    multiplicative_model,
    one_step_theta,
    population_ate,
    quantile_match_init,
    score_g,
    score_g_numeric,
)
from semitreat.sample import from_arms
from semitreat.shift import eif_estimate


@pytest.fixture(scope="module")
def lognormal_view():
    r = np.random.default_rng(61)
    c = np.exp(r.standard_normal(4000) * 0.5)
    t = 2.0 * np.exp(r.standard_normal(4000) * 0.5)
    return from_arms(c, t)


def test_round_trip_and_monotone():
    grid = np.linspace(0.1, 20, 200)
    for model, theta in ((additive_model(), 1.7), (multiplicative_model(), 2.3)):
        model.validate(grid, theta)
        np.testing.assert_allclose(model.h(model.h_inv(grid, theta), theta), grid, rtol=1e-12)


def test_custom_model_checked_at_construction():
    with pytest.raises(BadParamsError):
        TreatmentModel(
            h=lambda y, t: -y + t, h_inv=lambda y, t: t - y, dh_inv_dy=lambda y, t: -np.ones_like(y),
            check_grid=np.linspace(0, 1, 5), check_theta=0.0,
        )
    with pytest.raises(BadParamsError):
        get_model("quadratic")


def test_quantile_match_examples():
    v = from_arms([1, 2, 3], [2, 4, 6])
    assert quantile_match_init(v, multiplicative_model()) == pytest.approx(2.0)
    r = np.random.default_rng(0)
    w = from_arms(r.standard_normal(301), r.standard_normal(200) + 1)
    assert quantile_match_init(w, additive_model()) == diff_medians(w).tau_hat
    c = r.standard_normal(100)
    assert quantile_match_init(from_arms(c, c + 0.75), additive_model()) == pytest.approx(0.75)


def test_quantile_match_numeric_and_vector():
    # no closed-form solve: falls back to root finding
    m = TreatmentModel(h=lambda y, t: y + t**3, h_inv=lambda y, t: y - t**3, dh_inv_dy=lambda y, t: np.ones_like(y))
    c = np.random.default_rng(2).standard_normal(200)
    assert quantile_match_init(from_arms(c, c + 8.0), m) == pytest.approx(2.0, abs=1e-8)
    # location and scale: h = t0 + t1 * y
    ls = TreatmentModel(
        h=lambda y, t: t[0] + t[1] * y, h_inv=lambda y, t: (y - t[0]) / t[1],
        dh_inv_dy=lambda y, t: np.full(np.shape(y), 1 / t[1]), dim=2, theta0=np.array([0.0, 1.0]),
    )
    th = quantile_match_init(from_arms(c, 1.5 + 3.0 * c), ls, (0.25, 0.75))
    np.testing.assert_allclose(th, [1.5, 3.0], atol=1e-8)


def test_quantile_match_no_solution():
    m = TreatmentModel(
        h=lambda y, t: y + np.tanh(t), h_inv=lambda y, t: y - np.tanh(t), dh_inv_dy=lambda y, t: np.ones_like(y)
    )
    c = np.arange(10.0)
    with pytest.raises(NoSolutionError):
        quantile_match_init(from_arms(c, c + 5), m)


def test_additive_score_reduction(normal_view):
    fit = normal_view.control_fit
    y = np.linspace(-2, 2, 41)
    np.testing.assert_allclose(score_g(fit, additive_model(), 0.3, y), -eval_lpsi(fit, y - 0.3, 1))


def test_multiplicative_score(lognormal_view):
    fit = lognormal_view.control_fit
    y = np.linspace(0.5, 4, 40)
    th = 1.8
    hand = -(1 / th) * (1 + (y / th) * eval_lpsi(fit, y / th, 1))
    an = score_g(fit, multiplicative_model(), th, y)
    np.testing.assert_allclose(an, hand, rtol=1e-12)
    num = score_g_numeric(fit, multiplicative_model(), th, y)
    np.testing.assert_allclose(an, num, rtol=1e-4)


def test_additive_pipeline_matches_shift_module(normal_view):
    fit = normal_view.control_fit
    t0 = quantile_match_init(normal_view, additive_model())
    a = one_step_theta(normal_view, t0, additive_model(), fit0=fit, info="hessian")
    b = eif_estimate(normal_view, mode="onestep", init=t0, fit0=fit)
    assert a.tau_hat == pytest.approx(b.tau_hat, abs=1e-12)
    assert a.var_hat == pytest.approx(b.var_hat, rel=1e-12)
    assert in_sample_ate(normal_view, additive_model(), a.tau_hat) == pytest.approx(a.tau_hat, abs=1e-12)
    s1 = one_step_theta(normal_view, t0, additive_model(), split=True, seed=5, info="hessian")
    s2 = eif_estimate(normal_view, split=True, mode="onestep", init=t0, seed=5)
    assert s1.tau_hat == pytest.approx(s2.tau_hat, abs=1e-12)


def test_score_information_close_to_hessian(normal_view):
    fit = normal_view.control_fit
    a = info_hat(fit, additive_model(), 0.0, normal_view.control, "score")
    b = info_hat(fit, additive_model(), 0.0, normal_view.control, "hessian")
    assert a == pytest.approx(b, rel=0.2)
    with pytest.raises(ValueError):
        info_hat(fit, additive_model(), 0.0, normal_view.control, "fisher")


@pytest.mark.parametrize("delta", [-0.05, 0.05])
def test_multiplicative_one_step_improves(delta):
    r = np.random.default_rng(9)
    c = np.exp(r.standard_normal(5000) * 0.4)
    v = from_arms(c, 2 * c)
    e = one_step_theta(v, 2 + delta, multiplicative_model())
    assert abs(e.tau_hat - 2) < abs(delta) + 1e-6


def test_degenerate_information(normal_view, monkeypatch):
    import semitreat.parametric as par

    monkeypatch.setattr(par, "info_hat", lambda *a, **k: 0.0)
    with pytest.raises(DegenerateInfoError):
        par.one_step_theta(normal_view, 0.0, additive_model())


def test_information_scaling_multiplicative(lognormal_view):
    m = multiplicative_model()
    s = 3.0
    c = lognormal_view.control
    i1 = info_hat(fit_adaptive_density(c), m, 2.0, c)
    i2 = info_hat(fit_adaptive_density(s * c), m, 2.0, s * c)
    # scaling outcomes leaves theta and its information unchanged
    assert i1 == pytest.approx(i2, rel=1e-8)
    shifted = info_hat(fit_adaptive_density(c + 5), additive_model(), 0.1, c + 5)
    assert shifted == pytest.approx(info_hat(fit_adaptive_density(c), additive_model(), 0.1, c), rel=1e-8)


def test_vector_theta_one_step():
    r = np.random.default_rng(3)
    c = r.standard_normal(3000)
    ls = TreatmentModel(
        h=lambda y, t: t[0] + t[1] * y, h_inv=lambda y, t: (y - t[0]) / t[1],
        dh_inv_dy=lambda y, t: np.full(np.shape(y), 1 / t[1]), dim=2, theta0=np.array([0.0, 1.0]),
    )
    v = from_arms(c, 1.0 + 2.0 * r.standard_normal(3000))
    t0 = quantile_match_init(v, ls, (0.25, 0.75))
    e = one_step_theta(v, t0, ls)
    np.testing.assert_allclose(e.diagnostics["theta"], [1.0, 2.0], atol=0.2)
    assert e.diagnostics["cov"].shape == (2, 2)


def test_ate_examples():
    m = multiplicative_model()
    assert in_sample_ate(from_arms([1.0], [4.0]), m, 2.0) == pytest.approx(1.5)
    assert in_sample_ate(from_arms([1.0, 5.0], [4.0]), m, 1.0) == 0
    assert population_ate([1.0, 3.0], m, 2.0) == pytest.approx(2.0)
    assert population_ate([1.0, 3.0], m, 1.0) == 0
    assert population_ate([1.0, 3.0], additive_model(), 0.4) == pytest.approx(0.4)
    v = from_arms([0.3, 9.0], [1.0, -2.0, 4.0])
    assert in_sample_ate(v, additive_model(), 0.7) == pytest.approx(0.7)


def test_level_from_log():
    e = level_from_log(0.0, 38745.0, 34872.0, 0.0531, 1.0)
    assert e.tau == 0
    assert e.var == pytest.approx((0.9469 * 38745 + 0.0531 * 34872) ** 2)
    assert level_from_log(0.3, 2.0, 3.0, 0.4, 0.0).var == 0
    t = 0.2
    e = level_from_log(t, 2.0, 3.0, 0.4, 0.01)
    assert e.tau == pytest.approx(0.6 * (np.exp(t) - 1) * 2 + 0.4 * (1 - np.exp(-t)) * 3)
    with pytest.raises(BadParamsError):
        level_from_log(0.1, 1.0, 1.0, 1.0, 0.1)
