"""Efficient estimators of a constant additive treatment effect.

Two estimators attain the efficiency bound ``1 / (p (1-p) I(f) n)`` when the
treated outcomes are the control outcomes shifted by a constant: a score
(M-) estimator built from the estimated control log-density derivative,
and a weighted average of quantile differences (L-estimator) whose weights
are the estimated ``-(log f)''`` at the control quantiles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .density import DensityFit, eval_density, eval_lpsi, fit_adaptive_density
from .exceptions import (
    AllTruncatedError,
    BadLawError,
    DegenerateInfoError,
    NoBracketError,
)
from .laws import Law, get_law
from .sample import (
    Estimate,
    TwoSampleView,
    empirical_quantile,
    from_arms,
    quantile_index,
)

__all__ = [
    "WaqWeights",
    "waq_weights",
    "waq_estimate",
    "eif_estimate",
    "eif_score",
    "information_hat",
    "shift_variance",
    "optimal_weight_oracle",
    "mad_scale",
    "split_halves",
]

MAD_NORMAL = 1.4826
BRACKET_CAP = 50.0


def mad_scale(*arrays) -> float:
    """Normal-consistent median absolute deviation of the pooled arrays.

    Each array is centred at its own median before pooling, so the scale
    is unchanged when one arm is shifted relative to the other.
    """
    dev = np.concatenate([np.abs(a - np.median(a)) for a in (np.asarray(x, dtype=float).ravel() for x in arrays)])
    return float(MAD_NORMAL * np.median(dev))


def information_hat(fit0: DensityFit, control) -> float:
    """``-mean(lpsi2(Y0))``, the plug-in Fisher information for location."""
    return float(-np.mean(eval_lpsi(fit0, np.asarray(control, dtype=float), 2)))


def shift_variance(fit0: DensityFit, control, p: float, n: int) -> float:
    """Asymptotic variance ``1 / (p (1-p) I n)`` with the plug-in information.

    Raises
    ------
    DegenerateInfoError
        If the plug-in information is not positive.
    """
    info = information_hat(fit0, control)
    if not info > 0:
        raise DegenerateInfoError(f"estimated Fisher information is {info:.3g}, not positive")
    return 1.0 / (p * (1 - p) * info * n)


@dataclass(frozen=True)
class WaqWeights:
    """Quantile weights on the grid ``i/(n0+1)``.

    Attributes
    ----------
    u_grid : ndarray
        Grid levels.
    w : ndarray
        Final weights; they sum to one and may be negative.
    truncated_mask : ndarray of bool
        Grid points whose weight was set to zero by the tail rule.
    quantile, f_hat, lpsi2 : ndarray
        Control quantile at each level, the kernel density there and the
        raw weight (second log-density derivative).
    threshold : float
        Truncation bound on the normalized weight to density ratio.
    """

    u_grid: np.ndarray
    w: np.ndarray
    truncated_mask: np.ndarray
    quantile: np.ndarray
    f_hat: np.ndarray
    lpsi2: np.ndarray
    threshold: float


def _gaps(arm: np.ndarray) -> np.ndarray:
    # first differences at each order statistic; the first reuses the second gap
    d = np.diff(arm)
    if d.size == 0:
        return np.zeros(arm.size)
    return np.concatenate([[d[0]], d])


def waq_weights(fit0: DensityFit, view: TwoSampleView, u=None) -> WaqWeights:
    """Efficient quantile weights estimated from `fit0` and the arms of `view`.

    The raw weight at level ``u`` is ``lpsi2`` at the control ``u``-quantile.
    Levels where the normalized raw weight is large relative to a crude
    spacing-based density estimate times the pooled MAD scale are zeroed,
    and the survivors are rescaled to sum to one.

    Parameters
    ----------
    fit0 : DensityFit
        Density fit of the control outcomes in `view`.
    view : TwoSampleView
        Sample providing quantiles, spacings and the MAD scale. The control
        arm should be the larger one.
    u : array_like, optional
        Levels; the default is ``i/(n0+1)``, ``i = 1..n0``.

    Raises
    ------
    AllTruncatedError
        If no weight survives, or the survivors sum to zero.
    """
    n0, n1, n = view.n0, view.n1, view.n
    u = np.arange(1, n0 + 1) / (n0 + 1) if u is None else np.asarray(u, dtype=float)
    i0 = quantile_index(n0, u)
    i1 = quantile_index(n1, u)
    q = view.control[i0]
    raw = eval_lpsi(fit0, q, 2)
    total = raw.sum()
    spacing = np.maximum(_gaps(view.control)[i0], _gaps(view.treated)[i1])
    with np.errstate(divide="ignore", invalid="ignore"):
        f_adhoc = np.where(spacing > 0, (1.0 / n0) / spacing, np.inf)
        ratio = np.abs((raw / total) / (f_adhoc * mad_scale(view.control, view.treated)))
    threshold = np.log(np.log(n)) / np.log(n) * n**0.25
    cut = ~(ratio < threshold)
    kept = np.where(cut, 0.0, raw)
    s = kept.sum()
    if cut.all() or s == 0 or not np.isfinite(s):
        raise AllTruncatedError("every quantile weight was truncated")
    w = kept / s
    return WaqWeights(u, w, cut, q, eval_density(fit0, q), raw, float(threshold))


def _weighted_diff(view: TwoSampleView, w: WaqWeights) -> float:
    i1 = quantile_index(view.n1, w.u_grid)
    i0 = quantile_index(view.n0, w.u_grid)
    return float(np.dot(w.w, view.treated[i1] - view.control[i0]))


def split_halves(view: TwoSampleView, seed: int) -> tuple[TwoSampleView, TwoSampleView]:
    """Random halves of each arm; odd leftovers go to the first half."""
    rng = np.random.default_rng(seed)
    halves = []
    for arm in (view.control, view.treated):
        perm = rng.permutation(arm.size)
        k = (arm.size + 1) // 2
        halves.append((arm[perm[:k]], arm[perm[k:]]))
    (c1, c2), (t1, t2) = halves
    return from_arms(c1, t1), from_arms(c2, t2)


def _orient(view: TwoSampleView):
    if view.n1 > view.n0:
        return view.swapped(), -1.0
    return view, 1.0


def waq_estimate(
    view: TwoSampleView,
    split: bool = False,
    seed: int = 0,
    *,
    fit0: DensityFit | None = None,
) -> Estimate:
    """Weighted average of quantile differences with estimated efficient weights.

    Requires the control arm to be at least as large as the treated arm; if
    it is not, the arms are exchanged and the sign of the result flipped.
    With ``split=True`` the weights fitted on one random half are applied to
    the other half and the two results averaged.

    Parameters
    ----------
    view : TwoSampleView
    split : bool, default False
    seed : int
        Seed of the random halving (``split=True`` only).
    fit0 : DensityFit, optional
        Fit of the (larger) control arm for the full-sample estimate.

    Returns
    -------
    Estimate
        ``diagnostics`` carries the weights and the number truncated.
    """
    v, sign = _orient(view)
    if not split:
        if fit0 is None:
            fit0 = v.control_fit
        w = waq_weights(fit0, v)
        tau = _weighted_diff(v, w)
        var = shift_variance(fit0, v.control, v.p, v.n)
        diag = {"weights": w, "n_truncated": int(w.truncated_mask.sum()), "split": False}
    else:
        a, b = split_halves(v, seed)
        fa, fb = fit_adaptive_density(a.control), fit_adaptive_density(b.control)
        wb = waq_weights(fa, a, np.arange(1, b.n0 + 1) / (b.n0 + 1))
        wa = waq_weights(fb, b, np.arange(1, a.n0 + 1) / (a.n0 + 1))
        tau = 0.5 * (_weighted_diff(b, wb) + _weighted_diff(a, wa))
        info = 0.5 * (information_hat(fa, b.control) + information_hat(fb, a.control))
        if not info > 0:
            raise DegenerateInfoError(f"estimated Fisher information is {info:.3g}, not positive")
        var = 1.0 / (v.p * (1 - v.p) * info * v.n)
        diag = {
            "n_truncated": int(wa.truncated_mask.sum() + wb.truncated_mask.sum()),
            "split": True,
            "seed": seed,
        }
    if sign < 0:
        diag["swapped_arms"] = True
    return Estimate(sign * tau, var, "waq", diag)


def eif_score(fit0: DensityFit, view: TwoSampleView, tau: float) -> float:
    """Estimating function ``mean_t lpsi1(Y1 - tau) - mean_c lpsi1(Y0)``."""
    return float(
        np.mean(eval_lpsi(fit0, view.treated - tau, 1)) - np.mean(eval_lpsi(fit0, view.control, 1))
    )


def _median_diff(view: TwoSampleView) -> float:
    return empirical_quantile(view.treated, 0.5) - empirical_quantile(view.control, 0.5)


def _bracket(score, tau0: float, s0: float, step: float, cap: float):
    """Expand geometrically around `tau0` until the score changes sign."""
    d = step
    evals = 0
    while d <= cap * (1 + 1e-12):
        for x in (tau0 - d, tau0 + d):
            s = score(x)
            evals += 1
            if np.sign(s) != np.sign(s0):
                return (min(x, tau0), max(x, tau0)), evals
        if d == cap:
            break
        d = min(2 * d, cap)
    return None, evals


class _CrossFit:
    # cross-fitted pieces of the split estimators: each half is scored with
    # the density fitted on the other half
    def __init__(self, view: TwoSampleView, seed: int):
        self.view = view
        self.halves = split_halves(view, seed)
        a, b = self.halves
        self.fits = (fit_adaptive_density(b.control), fit_adaptive_density(a.control))
        self.infos = tuple(
            information_hat(f, h.control) for f, h in zip(self.fits, (b, a))
        )

    def score(self, tau: float) -> float:
        n, p = self.view.n, self.view.p
        total = 0.0
        for half, fit in zip(self.halves, self.fits):
            total += np.sum(eval_lpsi(fit, half.treated - tau, 1)) / (n * p)
            total -= np.sum(eval_lpsi(fit, half.control, 1)) / (n * (1 - p))
        return float(total)

    def one_step(self, tau0: float) -> float:
        n, p = self.view.n, self.view.p
        upd = 0.0
        for half, fit, info in zip(self.halves, self.fits, self.infos):
            if not info > 0:
                raise DegenerateInfoError(f"estimated Fisher information is {info:.3g}, not positive")
            s = np.sum(eval_lpsi(fit, half.treated - tau0, 1)) / p
            s -= np.sum(eval_lpsi(fit, half.control, 1)) / (1 - p)
            upd -= s / info
        return float(tau0 + upd / n)

    def variance(self) -> float:
        info = float(np.mean(self.infos))
        if not info > 0:
            raise DegenerateInfoError(f"estimated Fisher information is {info:.3g}, not positive")
        v = self.view
        return 1.0 / (v.p * (1 - v.p) * info * v.n)


def eif_estimate(
    view: TwoSampleView,
    split: bool = False,
    mode: str = "root",
    init: Estimate | float | None = None,
    seed: int = 0,
    *,
    fit0: DensityFit | None = None,
    strict: bool = False,
) -> Estimate:
    """Efficient score estimator of a constant shift.

    Parameters
    ----------
    view : TwoSampleView
    split : bool, default False
        Cross-fit the density on random halves.
    mode : {"root", "onestep"}
        ``"root"`` solves the estimating equation with a bracketing solver;
        ``"onestep"`` takes a single Newton step from `init` using the
        plug-in information.
    init : Estimate or float, optional
        Starting value; defaults to the difference in sample medians.
    seed : int
        Seed of the random halving.
    fit0 : DensityFit, optional
        Control-arm fit to reuse (full-sample path only).
    strict : bool, default False
        Raise :class:`NoBracketError` instead of falling back.

    Returns
    -------
    Estimate
        Diagnostics report the mode actually used, the bracket, the final
        score value and whether the root search fell back to a one-step
        update.

    Notes
    -----
    When no sign change of the score is found within 50 MAD scales of the
    starting value, the one-step update is returned and the diagnostics
    flag ``no_bracket``.
    """
    if mode not in ("root", "onestep"):
        raise ValueError(f"mode must be 'root' or 'onestep', got {mode!r}")
    if init is None:
        tau0 = _median_diff(view)
    else:
        tau0 = float(init.tau_hat if isinstance(init, Estimate) else init)

    if split:
        cf = _CrossFit(view, seed)
        score = cf.score
        var = cf.variance()

        def onestep():
            return cf.one_step(tau0)

    else:
        if fit0 is None:
            fit0 = view.control_fit
        # the control mean does not depend on tau
        base = float(np.mean(eval_lpsi(fit0, view.control, 1)))

        def score(t):
            return float(np.mean(eval_lpsi(fit0, view.treated - t, 1))) - base

        var = shift_variance(fit0, view.control, view.p, view.n)
        info = 1.0 / (view.p * (1 - view.p) * var * view.n)

        def onestep():
            return tau0 - score(tau0) / info

    diag = {"init": tau0, "split": split, "mode": mode}
    if mode == "onestep":
        tau = onestep()
        diag["score"] = score(tau)
        return Estimate(tau, var, "eif", diag)

    scale = mad_scale(view.control, view.treated)
    s0 = score(tau0)
    if s0 == 0:
        diag.update(score=0.0, iterations=0, bracket=(tau0, tau0))
        return Estimate(tau0, var, "eif", diag)
    step = max(np.sqrt(var), 1e-6 * scale, np.finfo(float).tiny)
    bracket, evals = _bracket(score, tau0, s0, step, BRACKET_CAP * scale)
    if bracket is None:
        if strict:
            raise NoBracketError("no sign change of the score within the search range")
        tau = onestep()
        diag.update(no_bracket=True, fallback="onestep", score=score(tau), evaluations=evals)
        return Estimate(tau, var, "eif", diag)
    tau, res = optimize.brentq(
        score, *bracket, xtol=4 * np.finfo(float).eps * max(scale, 1e-300), full_output=True
    )
    diag.update(
        bracket=bracket,
        iterations=res.iterations + evals,
        score=score(tau),
        no_bracket=False,
    )
    return Estimate(tau, var, "eif", diag)


def optimal_weight_oracle(law: str | Law, u, **params):
    """Population efficient weight ``(1/I) (-f'/f)'(F^{-1}(u))``.

    For the Laplace law the efficient weight is a unit point mass at
    ``u = 1/2``; the function then returns zeros and the atom is available
    as ``law.weight_atoms``.

    Raises
    ------
    BadLawError
        For laws without a closed form (``empirical``) or unknown names.
    """
    if isinstance(law, str):
        law = get_law(law, **params)
    if not isinstance(law, Law):
        raise BadLawError(f"no closed-form efficient weights for law {getattr(law, 'name', law)!r}")
    u = np.asarray(u, dtype=float)
    out = law.efficient_weight(u)
    return float(out) if out.ndim == 0 else out
