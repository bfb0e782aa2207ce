"""Asymmetrically trimmed and winsorized two-sample means.

All integrals over the quantile scale are computed exactly for the
empirical quantile function, which is a step function taking the value
``x_(k)`` on ``((k-1)/m, k/m]``. Prefix sums make each evaluation O(1), so
the adaptive search can scan a dense ``(alpha, beta)`` grid cheaply.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import BadTrimError
from .laws import ExtendedHuber
from .sample import Estimate, TwoSampleView, quantile_index

__all__ = [
    "TrimSpec",
    "ExtendedHuber",
    "sigma2_hat",
    "winsorized_sigma2_hat",
    "trimmed_tau",
    "winsorized_tau",
    "adapt_trim",
]

_MODES = {"sym": "symmetric", "symmetric": "symmetric", "asym": "asymmetric",
          "asymmetric": "asymmetric", "right": "right", "right-only": "right"}


@dataclass(frozen=True)
class TrimSpec:
    """Trim fractions removed from the left (`alpha`) and right (`beta`) tails."""

    alpha: float = 0.0
    beta: float = 0.0
    mode: str = "asymmetric"

    def __post_init__(self):
        a, b = float(self.alpha), float(self.beta)
        if not (0 <= a < 0.5 and 0 <= b < 0.5):
            raise BadTrimError(f"trim fractions must lie in [0, 1/2), got alpha={a}, beta={b}")
        if self.mode not in _MODES:
            raise BadTrimError(f"unknown trim mode {self.mode!r}")
        object.__setattr__(self, "mode", _MODES[self.mode])
        if self.mode == "symmetric" and a != b:
            raise BadTrimError("symmetric trimming needs alpha == beta")
        if self.mode == "right" and a != 0:
            raise BadTrimError("right-only trimming needs alpha == 0")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)


class _StepQuantile:
    """Exact u-integrals of the empirical quantile function of a sorted arm."""

    def __init__(self, arm):
        x = np.asarray(arm, dtype=float)
        self.m = x.size
        # centring keeps the second-moment algebra free of cancellation
        self.shift = float(x[(self.m - 1) // 2])
        self.x = x - self.shift
        self.s1 = np.concatenate([[0.0], np.cumsum(self.x)])
        self.s2 = np.concatenate([[0.0], np.cumsum(self.x**2)])

    def q(self, u):
        return self.x[quantile_index(self.m, u)]

    def _cum(self, t, s, power):
        # int_0^t Q(u)^power du
        m = self.m
        k = np.clip(np.floor(np.multiply(t, m)).astype(np.int64), 0, m - 1)
        return s[k] / m + (t - k / m) * self.x[k] ** power

    def moments(self, lo, hi):
        """``int_lo^hi Q`` and ``int_lo^hi Q**2`` (centred values)."""
        p1 = self._cum(hi, self.s1, 1) - self._cum(lo, self.s1, 1)
        p2 = self._cum(hi, self.s2, 2) - self._cum(lo, self.s2, 2)
        return p1, p2

    def winsor_parts(self, alpha, beta):
        alpha = np.asarray(alpha, dtype=float)
        beta = np.asarray(beta, dtype=float)
        a = self.q(np.where(alpha > 0, alpha, 1.0 / self.m))
        b = self.q(1 - beta)
        p1, p2 = self.moments(alpha, 1 - beta)
        mu = p1 + alpha * a + beta * b
        ec2 = p2 + alpha * a * a + beta * b * b
        return a, b, mu, ec2

    def quantile_slope(self, u):
        """Difference-quotient estimate of ``dQ/du = 1 / f(Q(u))``."""
        m = self.m
        d = 0.5 * m ** (-1 / 3)
        lo = np.clip(u - d, 1.0 / m, 1.0)
        hi = np.clip(u + d, 1.0 / m, 1.0)
        return (self.q(hi) - self.q(lo)) / (hi - lo)


def _check(spec: TrimSpec | None, alpha=None, beta=None) -> TrimSpec:
    if spec is None:
        spec = TrimSpec(alpha or 0.0, beta or 0.0)
    if not isinstance(spec, TrimSpec):
        spec = TrimSpec(*spec)
    return spec


def _trim_sigma2(sq: _StepQuantile, alpha, beta):
    a, b, mu, _ = sq.winsor_parts(alpha, beta)
    p1, p2 = sq.moments(alpha, 1 - beta)
    keep = 1 - alpha - beta
    mid = p2 - 2 * mu * p1 + mu * mu * keep
    out = (alpha * (a - mu) ** 2 + mid + beta * (b - mu) ** 2) / keep**2
    return np.maximum(out, 0.0)


def _wins_sigma2(sq: _StepQuantile, alpha, beta):
    a, b, mu, ec2 = sq.winsor_parts(alpha, beta)
    sa = alpha * np.where(alpha > 0, sq.quantile_slope(alpha), 0.0)
    sb = beta * np.where(beta > 0, sq.quantile_slope(1 - beta), 0.0)
    mean = mu - sa * alpha + sb * beta
    second = ec2 + sa * sa * alpha + sb * sb * beta - 2 * sa * alpha * a + 2 * sb * beta * b
    return np.maximum(second - mean * mean, 0.0)


def sigma2_hat(arm, spec: TrimSpec | tuple) -> float:
    """Plug-in asymptotic variance of the ``(alpha, beta)``-trimmed mean.

    Integrates the squared influence function

    .. math:: \\psi(x) = (\\min(\\max(x, a), b) - \\mu_w) / (1 - \\alpha - \\beta)

    against the empirical distribution, where ``a`` and ``b`` are the
    empirical ``alpha`` and ``1 - beta`` quantiles and ``mu_w`` is the
    winsorized mean.

    Parameters
    ----------
    arm : array_like
        Sample of at least 3 values (sorted internally).
    spec : TrimSpec or (alpha, beta)

    Returns
    -------
    float
    """
    spec = _check(spec)
    arm = np.sort(np.asarray(arm, dtype=float))
    if arm.size < 3:
        raise BadTrimError(f"variance of a trimmed mean needs at least 3 values, got {arm.size}")
    return float(_trim_sigma2(_StepQuantile(arm), spec.alpha, spec.beta))


def winsorized_sigma2_hat(arm, spec: TrimSpec | tuple) -> float:
    """Plug-in asymptotic variance of the winsorized mean.

    The influence function is that of the clipped value plus the effect of
    estimating the two clipping quantiles, each weighted by its tail mass
    and the quantile density ``1/f`` at the cut::

        psi(x) = clip(x, a, b) - (alpha/f(a)) 1{x <= a} + (beta/f(b)) 1{x > b} - const
    """
    spec = _check(spec)
    arm = np.sort(np.asarray(arm, dtype=float))
    if arm.size < 3:
        raise BadTrimError(f"variance of a winsorized mean needs at least 3 values, got {arm.size}")
    return float(_wins_sigma2(_StepQuantile(arm), spec.alpha, spec.beta))


def _orient(view: TwoSampleView):
    # the quantile-difference sums index the larger arm fully
    if view.n1 > view.n0:
        return view.swapped(), -1.0
    return view, 1.0


def trimmed_tau(view: TwoSampleView, spec: TrimSpec | tuple = (0.0, 0.0)) -> Estimate:
    """Difference of trimmed means computed on a common quantile grid.

    The quantile-difference curve is averaged over the grid points
    ``i/(n0+1)`` that fall in ``(alpha, 1 - beta]``. When no grid point lies
    in that window, the curve is read at the window centre, which yields the
    difference of medians in the limit of full trimming.
    """
    spec = _check(spec)
    v, sign = _orient(view)
    n0, n1 = v.n0, v.n1
    u = np.arange(1, n0 + 1) / (n0 + 1)
    sel = (u > spec.alpha) & (u <= 1 - spec.beta)
    if sel.any():
        i = np.flatnonzero(sel)
        diffs = v.treated[quantile_index(n1, u[i])] - v.control[i]
        tau = diffs.mean()
    else:
        mid = 0.5 * (spec.alpha + 1 - spec.beta)
        tau = v.treated[quantile_index(n1, mid)] - v.control[quantile_index(n0, mid)]
    var = _two_arm_var(view, spec, sigma2_hat) if min(view.n0, view.n1) >= 3 else None
    return Estimate(sign * tau, var, "trim", {"alpha": spec.alpha, "beta": spec.beta, "grid_points": int(sel.sum())})


def winsorized_tau(view: TwoSampleView, spec: TrimSpec | tuple = (0.0, 0.0)) -> Estimate:
    """Difference of winsorized arm means.

    Values below the empirical ``alpha`` quantile are raised to it and values
    above the ``1 - beta`` quantile lowered to it before averaging.
    """
    spec = _check(spec)
    if spec.alpha == 0 and spec.beta == 0:
        mus = [float(view.treated.mean()), float(view.control.mean())]
    else:
        mus = []
        for arm in (view.treated, view.control):
            sq = _StepQuantile(arm)
            mus.append(float(sq.winsor_parts(spec.alpha, spec.beta)[2]) + sq.shift)
    var = _two_arm_var(view, spec, winsorized_sigma2_hat) if min(view.n0, view.n1) >= 3 else None
    diag = {"alpha": spec.alpha, "beta": spec.beta, "mean_treated": mus[0], "mean_control": mus[1]}
    return Estimate(mus[0] - mus[1], var, "wins", diag)


def _two_arm_var(view, spec, fn):
    p = view.p
    return (fn(view.treated, spec) / p + fn(view.control, spec) / (1 - p)) / view.n


def _axis(lo: float, hi: float, step: float) -> np.ndarray:
    k = np.arange(np.ceil(lo / step - 1e-9), np.floor(hi / step + 1e-9) + 1)
    pts = np.concatenate([k * step, [lo, hi]])
    return np.unique(np.clip(pts, lo, hi))


def _candidates(mode, a_axis, b_axis):
    if mode == "symmetric":
        return a_axis, a_axis
    if mode == "right":
        return np.zeros_like(b_axis), b_axis
    aa, bb = np.meshgrid(a_axis, b_axis, indexing="ij")
    return aa.ravel(), bb.ravel()


def _argmin(obj, a, b):
    best = np.nanmin(obj)
    tie = np.flatnonzero(obj <= best + 1e-12 * abs(best))
    order = np.lexsort((b[tie], a[tie] + b[tie]))
    return tie[order[0]]


def adapt_trim(
    view: TwoSampleView,
    alpha0: float = 0.0,
    alpha1: float = 0.495,
    mode: str = "asymmetric",
    estimator: str = "trim",
    *,
    step: float = 1 / 200,
    refine: float = 1 / 2000,
) -> Estimate:
    """Trimmed or winsorized estimate with data-driven trim fractions.

    The fractions minimize the estimated asymptotic variance
    ``sigma1^2(alpha, beta)/p + sigma0^2(alpha, beta)/(1-p)`` over a grid on
    ``[alpha0, alpha1]`` with spacing `step`, refined once around the coarse
    minimum with spacing `refine`. Ties go to the least total trimming.

    Parameters
    ----------
    view : TwoSampleView
    alpha0, alpha1 : float
        Range searched for each fraction, ``0 <= alpha0 <= alpha1 < 1/2``.
    mode : {"asymmetric", "symmetric", "right"}
        ``"right"`` keeps ``alpha = 0`` and only searches the right tail.
    estimator : {"trim", "wins"}

    Returns
    -------
    Estimate
        Diagnostics hold ``alpha_hat``, ``beta_hat`` and the coarse objective
        surface.
    """
    if not 0 <= alpha0 <= alpha1 < 0.5:
        raise BadTrimError(f"need 0 <= alpha0 <= alpha1 < 1/2, got {alpha0}, {alpha1}")
    if mode not in _MODES:
        raise BadTrimError(f"unknown trim mode {mode!r}")
    mode = _MODES[mode]
    if estimator not in ("trim", "wins"):
        raise ValueError(f"estimator must be 'trim' or 'wins', got {estimator!r}")
    fn = _trim_sigma2 if estimator == "trim" else _wins_sigma2
    sq1, sq0 = _StepQuantile(view.treated), _StepQuantile(view.control)
    p = view.p

    def objective(a, b):
        return fn(sq1, a, b) / p + fn(sq0, a, b) / (1 - p)

    axis = _axis(alpha0, alpha1, step)
    a, b = _candidates(mode, axis, axis)
    obj = objective(a, b)
    k = _argmin(obj, a, b)
    coarse = {"alpha": a, "beta": b, "objective": obj}

    fine_a = _axis(max(alpha0, a[k] - step), min(alpha1, a[k] + step), refine)
    fine_b = _axis(max(alpha0, b[k] - step), min(alpha1, b[k] + step), refine)
    if mode == "symmetric":
        fine_b = fine_a
    fa, fb = _candidates(mode, fine_a, fine_b)
    fobj = objective(fa, fb)
    j = _argmin(fobj, fa, fb)
    alpha_hat, beta_hat = float(fa[j]), float(fb[j])

    spec = TrimSpec(alpha_hat, beta_hat, mode)
    est = (trimmed_tau if estimator == "trim" else winsorized_tau)(view, spec)
    est.method = "adaptive-" + estimator
    est.diagnostics.update(
        alpha_hat=alpha_hat,
        beta_hat=beta_hat,
        objective_min=float(fobj[j]),
        objective_curve=coarse,
    )
    return est
