import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from semitreat.classic import diff_means, diff_medians
from semitreat.exceptions import BadParamsError, BadTrimError
from semitreat.laws import ExtendedHuber
from semitreat.sample import from_arms
from semitreat.simulation import trim_sigma2_population
from semitreat.trimming import (
    TrimSpec,
    adapt_trim,
    sigma2_hat,
    trimmed_tau,
    winsorized_sigma2_hat,
    winsorized_tau,
)


@pytest.mark.parametrize(
    "args",
    [(0.5, 0.1), (0.1, 0.5), (-0.1, 0.0), (0.1, 0.2, "symmetric"), (0.1, 0.2, "right"), (0.1, 0.1, "wild")],
)
def test_trimspec_validation(args):
    with pytest.raises(BadTrimError):
        TrimSpec(*args)


def test_trimspec_aliases():
    assert TrimSpec(0.1, 0.1, "sym").mode == "symmetric"
    assert TrimSpec(0.0, 0.3, "right").mode == "right"


def test_no_trimming_matches_means(rng):
    c, t = rng.standard_normal(500), rng.standard_normal(400) + 1
    v = from_arms(c, t)
    bound = (max(c.max(), t.max()) - min(c.min(), t.min())) / 400
    assert abs(trimmed_tau(v, (0, 0)).tau_hat - diff_means(v).tau_hat) <= bound
    assert winsorized_tau(v, (0, 0)).tau_hat == pytest.approx(diff_means(v).tau_hat, rel=1e-13)


def test_full_trimming_gives_medians(rng):
    v = from_arms(rng.standard_normal(501), rng.standard_normal(333))
    e = trimmed_tau(v, (0.4999999, 0.4999999))
    assert e.tau_hat == diff_medians(v).tau_hat


@pytest.mark.parametrize("spec", [(0.1, 0.3), (0.0, 0.45), (0.2, 0.2)])
def test_shift_gives_constant(rng, spec):
    c = rng.standard_cauchy(300)
    v = from_arms(c, c + 2.5)
    assert trimmed_tau(v, spec).tau_hat == pytest.approx(2.5)
    assert winsorized_tau(v, spec).tau_hat == pytest.approx(2.5)


def test_winsorized_hand_case():
    v = from_arms([0, 1, 2, 3, 100], [0, 1, 2, 3, 100])
    e = winsorized_tau(v, (0.0, 0.2))
    assert e.diagnostics["mean_control"] == pytest.approx(1.8)
    assert e.tau_hat == 0


def test_bad_trim_raises(rng):
    v = from_arms(rng.standard_normal(10), rng.standard_normal(10))
    with pytest.raises(BadTrimError):
        trimmed_tau(v, (0.6, 0.5))


def test_sigma2_plain_variance():
    x = np.random.default_rng(1).standard_normal(100_000)
    assert sigma2_hat(x, (0, 0)) == pytest.approx(np.var(x), rel=1e-9)
    assert abs(sigma2_hat(x, (0, 0)) - 1) < 0.05


def test_sigma2_uniform_matches_double_integral():
    x = np.random.default_rng(2).uniform(size=100_000)
    a = b = 0.25
    k = lambda s, t: min(s, t) - s * t
    inner = integrate.dblquad(lambda t, s: k(s, t), a, 1 - b, a, 1 - b, epsabs=1e-12)[0]
    oracle = inner / (1 - a - b) ** 2
    assert oracle == pytest.approx(1 / 6, rel=1e-6)
    assert sigma2_hat(x, (a, b)) == pytest.approx(oracle, rel=0.02)


def test_sigma2_constant_arm():
    assert sigma2_hat(np.full(50, 3.0), (0.1, 0.2)) == 0
    assert winsorized_sigma2_hat(np.full(50, 3.0), (0.1, 0.2)) == 0


@pytest.mark.parametrize("law,a,b", [("uniform", 0.1, 0.2), ("normal", 0.05, 0.3), ("normal", 0.2, 0.2)])
def test_sigma2_converges_to_population(law, a, b):
    r = np.random.default_rng(8)
    if law == "uniform":
        x = r.uniform(size=100_000)
        ppf, pdf = stats.uniform.ppf, stats.uniform.pdf
    else:
        x = r.standard_normal(100_000)
        ppf, pdf = stats.norm.ppf, stats.norm.pdf
    kern = lambda s, t: (min(s, t) - s * t) / (pdf(ppf(s)) * pdf(ppf(t)))
    # trimmed-mean variance from its influence function
    qa, qb = ppf(a), ppf(1 - b)
    mu = integrate.quad(ppf, a, 1 - b)[0] + a * qa + b * qb
    inner = integrate.quad(lambda u: (ppf(u) - mu) ** 2, a, 1 - b)[0]
    pop = (inner + a * (qa - mu) ** 2 + b * (qb - mu) ** 2) / (1 - a - b) ** 2
    double = integrate.dblquad(lambda t, s: kern(s, t), a, 1 - b, a, 1 - b, epsabs=1e-7, epsrel=1e-7)[0] / (1 - a - b) ** 2
    assert pop == pytest.approx(double, rel=1e-4)
    assert sigma2_hat(x, (a, b)) == pytest.approx(pop, rel=0.05)


def test_winsorized_variance_against_bootstrap():
    r = np.random.default_rng(4)
    x = r.standard_cauchy(4000)
    spec = (0.1, 0.15)
    analytic = winsorized_sigma2_hat(x, spec)
    # each resample re-estimates its own clipping points
    boots = []
    for _ in range(400):
        s = np.sort(r.choice(x, x.size))
        a, b = s[int(np.ceil(0.1 * s.size)) - 1], s[int(np.ceil(0.85 * s.size)) - 1]
        boots.append(np.clip(s, a, b).mean())
    assert analytic / x.size == pytest.approx(np.var(boots, ddof=1), rel=0.25)


def test_adapt_trim_normal_prefers_little_trimming(normal_view):
    e = adapt_trim(normal_view)
    d = e.diagnostics
    assert d["alpha_hat"] + d["beta_hat"] < 0.3
    curve = d["objective_curve"]
    at0 = curve["objective"][(curve["alpha"] == 0) & (curve["beta"] == 0)][0]
    assert d["objective_min"] <= at0
    assert e.method == "adaptive-trim"


def test_adapt_trim_laplace_beats_median_point():
    r = np.random.default_rng(21)
    v = from_arms(r.laplace(size=5000), r.laplace(size=5000))
    e = adapt_trim(v, mode="symmetric")
    c = e.diagnostics["objective_curve"]
    last = c["objective"][np.argmax(c["alpha"])]
    assert e.diagnostics["objective_min"] <= last
    assert e.diagnostics["alpha_hat"] == e.diagnostics["beta_hat"]


def test_adapt_trim_right_mode(cauchy_view):
    e = adapt_trim(cauchy_view, mode="right", estimator="wins")
    assert e.diagnostics["alpha_hat"] == 0
    assert e.method == "adaptive-wins"


def test_adapt_trim_range_validation(normal_view):
    with pytest.raises(BadTrimError):
        adapt_trim(normal_view, 0.3, 0.2)
    with pytest.raises(BadTrimError):
        adapt_trim(normal_view, 0.0, 0.5)


def test_adapt_trim_huber_optimum():
    law = ExtendedHuber(1.0, 3.0)
    r = np.random.default_rng(31)
    v = from_arms(law.sample(50_000, r), law.sample(50_000, r))
    d = adapt_trim(v).diagnostics
    assert abs(d["alpha_hat"] - law.alpha) < 0.05
    assert abs(d["beta_hat"] - law.beta) < 0.05


class TestExtendedHuber:
    def test_params(self):
        with pytest.raises(BadParamsError):
            ExtendedHuber(0.0, 1.0)
        with pytest.raises(BadParamsError):
            ExtendedHuber(1.0, 1.0, sigma=-1)

    @pytest.mark.parametrize("k1,k2", [(0.5, 0.5), (0.5, 2), (1, 3), (2.5, 0.7)])
    def test_normalization(self, k1, k2):
        law = ExtendedHuber(k1, k2)
        total = sum(integrate.quad(law.pdf, lo, hi, epsabs=1e-13)[0] for lo, hi in ((-np.inf, -k1), (-k1, k2), (k2, np.inf)))
        assert total == pytest.approx(1, abs=1e-8)
        assert law.pdf(0.0) == pytest.approx(np.exp(-law.c), rel=1e-14)
        assert law.cdf(-k1) == pytest.approx(law.pdf(-k1) / k1, abs=1e-10)
        assert 1 - law.cdf(k2) == pytest.approx(law.pdf(k2) / k2, abs=1e-10)
        assert law.information == pytest.approx(1 - law.alpha - law.beta)

    def test_gaussian_limit(self):
        law = ExtendedHuber(40, 40)
        x = np.linspace(-5, 5, 1001)
        assert np.max(np.abs(law.pdf(x) - stats.norm.pdf(x))) < 1e-6
        assert law.c == pytest.approx(np.log(np.sqrt(2 * np.pi)), abs=1e-12)

    def test_quantile_round_trip(self):
        law = ExtendedHuber(0.8, 1.7, mu=2.0, sigma=3.0)
        u = np.linspace(1e-6, 1 - 1e-6, 2001)
        np.testing.assert_allclose(law.cdf(law.ppf(u)), u, atol=1e-12)

    def test_sampler(self):
        law = ExtendedHuber(0.5, 2.0)
        x = law.sample(20_000, np.random.default_rng(0))
        assert stats.kstest(x, law.cdf).pvalue > 1e-3


@pytest.mark.parametrize("k1,k2", [(0.5, 0.5), (1, 3)])
def test_population_optimum(k1, k2):
    law = ExtendedHuber(k1, k2)
    s2 = trim_sigma2_population(law, law.alpha, law.beta)
    assert s2 * (1 - law.alpha - law.beta) == pytest.approx(1, rel=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.floats(-50, 50), st.floats(0.05, 20), st.sampled_from([(0.1, 0.2), (0.0, 0.0), (0.3, 0.05)]))
def test_trim_wins_equivariant(c, s, spec):
    r = np.random.default_rng(17)
    x0, x1 = r.standard_cauchy(200), r.standard_cauchy(150)
    for fn in (trimmed_tau, winsorized_tau):
        t = fn(from_arms(x0, x1), spec).tau_hat
        assert fn(from_arms(x0, x1 + c), spec).tau_hat == pytest.approx(t + c, abs=1e-9 * (1 + abs(t) + abs(c)))
        assert fn(from_arms(s * x0, s * x1), spec).tau_hat == pytest.approx(s * t, rel=1e-9, abs=1e-9)
