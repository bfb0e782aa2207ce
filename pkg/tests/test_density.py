import numpy as np
import pytest
from scipy import integrate, stats

from semitreat.density import (
    DENSITY_FLOOR,
    GRID_SIZE,
    eval_density,
    eval_lpsi,
    fit_adaptive_density,
    log_density,
    robust_sigma,
    triweight,
    triweight_d1,
    triweight_d2,
)
from semitreat.exceptions import DegenerateScaleError, TooFewPointsError


def _brute_force(x, points, sensitivity=0.5):
    # direct O(m * k) evaluation of the two-stage estimator
    x = np.sort(x)
    m = x.size
    s = robust_sigma(x)
    h, h1, h2 = 3.15 * s * m ** -0.2, 2.83 * s * m ** (-1 / 7), 2.70 * s * m ** (-1 / 9)
    pilot = triweight((x[:, None] - x[None, :]) / h).mean(axis=1) / h
    lam = (pilot / np.exp(np.mean(np.log(pilot)))) ** -sensitivity
    out = []
    for k, (hh, K) in enumerate(((h, triweight), (h1, triweight_d1), (h2, triweight_d2))):
        b = hh * lam
        z = (points[:, None] - x[None, :]) / b[None, :]
        out.append((K(z) / b ** (k + 1)).mean(axis=1))
    return out


def test_kernel_integrates_to_one_and_symmetry():
    assert abs(integrate.quad(triweight, -1, 1, epsabs=1e-13)[0] - 1) < 1e-10
    u = np.linspace(-1.2, 1.2, 101)
    np.testing.assert_allclose(triweight(u), triweight(-u))
    np.testing.assert_allclose(triweight_d1(u), -triweight_d1(-u))
    # derivatives are consistent with the kernel
    d = (triweight(u + 1e-6) - triweight(u - 1e-6)) / 2e-6
    np.testing.assert_allclose(triweight_d1(u), d, atol=1e-6)
    d2 = (triweight_d1(u + 1e-6) - triweight_d1(u - 1e-6)) / 2e-6
    np.testing.assert_allclose(triweight_d2(u), d2, atol=1e-5)


def test_robust_sigma_examples():
    base = np.linspace(-1.6449 * 10 / 9, 1.6449 * 10 / 9, 1001)
    data = np.concatenate([base])
    s = robust_sigma(data)
    q = np.sort(data)
    expect = (q[int(np.ceil(1001 * 0.95)) - 1] - q[int(np.ceil(1001 * 0.05)) - 1]) / (2 * 1.6449)
    assert s == pytest.approx(expect)
    assert robust_sigma(10 * data) == pytest.approx(10 * s)
    with pytest.raises(DegenerateScaleError):
        robust_sigma(np.ones(50))


def test_robust_sigma_normal_quantiles():
    x = stats.norm.ppf((np.arange(1, 100001) - 0.5) / 100000)
    assert robust_sigma(x) == pytest.approx(1.0, abs=1e-3)


def test_too_few_points():
    with pytest.raises(TooFewPointsError):
        fit_adaptive_density(np.arange(50.0))
    fit_adaptive_density(np.random.default_rng(0).standard_normal(50), min_points=20)


def test_matches_brute_force(rng):
    x = rng.standard_normal(600)
    fit = fit_adaptive_density(x)
    f0, f1, f2 = _brute_force(x, fit.grid)
    np.testing.assert_allclose(fit.fhat, f0, rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(fit.fhat1, f1, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(fit.fhat2, f2, rtol=1e-10, atol=1e-11)


def test_fit_structure(rng):
    x = rng.standard_normal(5000)
    fit = fit_adaptive_density(x)
    assert fit.grid.size == GRID_SIZE
    assert np.all(np.diff(fit.grid) >= 0)
    assert fit.grid[0] >= x.min() and fit.grid[-1] <= x.max()
    assert np.all(fit.fhat > 0) and np.all(fit.lam > 0) and fit.g > 0
    f = np.maximum(fit.fhat, DENSITY_FLOOR)
    np.testing.assert_allclose(fit.lpsi1, fit.fhat1 / f)
    np.testing.assert_allclose(fit.lpsi2, (f * fit.fhat2 - fit.fhat1**2) / f**2)


@pytest.fixture(scope="module")
def big_normal_fit():
    return fit_adaptive_density(np.random.default_rng(7).standard_normal(100_000))


def test_normal_density_at_zero(big_normal_fit):
    assert 0.37 <= eval_density(big_normal_fit, 0.0) <= 0.43


def test_normal_lpsi2_center(big_normal_fit):
    # the pointwise second derivative is noisy; average the central tenth of the grid
    mid = big_normal_fit.lpsi2[450:549]
    assert abs(mid.mean() + 1) < 0.15


def test_mass_and_derivative_consistency(big_normal_fit):
    fit = big_normal_fit
    assert 0.95 <= fit.integral() <= 1.01
    sl = slice(100, 899)
    fd = np.gradient(fit.fhat, fit.grid)[sl]
    scale = np.abs(fit.fhat1[sl]).max()
    # f' uses the wider bandwidth h1, so the two curves differ by smoothing bias
    assert np.max(np.abs(fd - fit.fhat1[sl])) < 0.2 * scale


def test_symmetric_sample_flat_at_median():
    x = np.random.default_rng(3).uniform(-1, 1, 20000)
    x = np.concatenate([x, -x])
    fit = fit_adaptive_density(x)
    med = np.median(x)
    d1 = np.interp(med, fit.grid, fit.fhat1)
    assert abs(d1) <= 0.1 * eval_density(fit, med) / fit.sigma_hat


def test_eval_lpsi_interpolation_rules(rng):
    fit = fit_adaptive_density(rng.standard_normal(2000))
    k = 500
    assert eval_lpsi(fit, fit.grid[k], 1) == fit.lpsi1[k]
    mid = 0.5 * (fit.grid[k] + fit.grid[k + 1])
    assert eval_lpsi(fit, mid, 2) == pytest.approx(0.5 * (fit.lpsi2[k] + fit.lpsi2[k + 1]))
    assert eval_lpsi(fit, fit.grid[0] - 10, 1) == fit.lpsi1[0]
    assert eval_lpsi(fit, fit.grid[-1] + 10, 2) == fit.lpsi2[-1]
    with pytest.raises(ValueError):
        eval_lpsi(fit, 0.0, 3)


def test_log_density_derivative(rng):
    fit = fit_adaptive_density(rng.standard_normal(3000))
    x = np.linspace(-1.5, 1.5, 31)
    h = 1e-6
    d = (log_density(fit, x + h) - log_density(fit, x - h)) / (2 * h)
    np.testing.assert_allclose(d, eval_lpsi(fit, x, 1), atol=1e-5)


@pytest.mark.parametrize("c,s", [(3.5, 1.0), (0.0, 2.5), (-7.25, 0.125)])
def test_location_scale_equivariance(rng, c, s):
    x = rng.standard_cauchy(3000)
    a = fit_adaptive_density(x)
    b = fit_adaptive_density(s * x + c)
    np.testing.assert_allclose(b.grid, s * a.grid + c, rtol=1e-12)
    np.testing.assert_allclose(b.fhat, a.fhat / s, rtol=1e-10, atol=1e-14)
    np.testing.assert_allclose(b.lpsi1, a.lpsi1 / s, rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(b.lpsi2, a.lpsi2 / s**2, rtol=1e-10, atol=1e-10)
