"""Baseline two-sample estimators: means, medians and Hodges-Lehmann."""

from __future__ import annotations

import numba
import numpy as np

from .density import DENSITY_FLOOR, DensityFit, eval_density
from .exceptions import DegenerateDensityError
from .sample import Estimate, TwoSampleView, empirical_quantile

__all__ = ["diff_means", "diff_medians", "hodges_lehmann", "pairwise_kth", "hl_point"]


def diff_means(view: TwoSampleView) -> Estimate:
    """Difference in arm means with the unpooled two-sample variance."""
    t, c = view.treated, view.control
    v1 = t.var(ddof=1) / view.n1 if view.n1 > 1 else 0.0
    v0 = c.var(ddof=1) / view.n0 if view.n0 > 1 else 0.0
    return Estimate(t.mean() - c.mean(), v1 + v0, "means")


def diff_medians(
    view: TwoSampleView,
    fit0: DensityFit | None = None,
    fit1: DensityFit | None = None,
    *,
    shared: bool = False,
) -> Estimate:
    """Difference in medians.

    The variance comes from the median influence function,
    ``1 / (4 f(m)^2 n_z)`` per arm, with densities from the arm fits. With
    ``shared=True`` the control fit is used for both arms, which is valid
    under a pure location shift.
    """
    m1 = empirical_quantile(view.treated, 0.5)
    m0 = empirical_quantile(view.control, 0.5)
    fit0 = fit0 if fit0 is not None else view.control_fit
    if shared:
        d0 = eval_density(fit0, m0)
        d1 = d0
    else:
        fit1 = fit1 if fit1 is not None else view.treated_fit
        d0 = eval_density(fit0, m0)
        d1 = eval_density(fit1, m1)
    if min(d0, d1) <= 10 * DENSITY_FLOOR:
        raise DegenerateDensityError("estimated density at a median is zero")
    var = 1 / (4 * d1**2 * view.n1) + 1 / (4 * d0**2 * view.n0)
    return Estimate(m1 - m0, var, "medians", {"median_treated": m1, "median_control": m0})


@numba.njit(cache=True)
def _count_le(t, c, v):
    # number of pairs with t[i] - c[j] <= v; for fixed i the qualifying j form
    # a suffix of c whose start moves right as i grows
    n0 = c.size
    j = 0
    total = 0
    for i in range(t.size):
        while j < n0 and t[i] - c[j] > v:
            j += 1
        total += n0 - j
    return total


@numba.njit(cache=True)
def _first_le(t, c, v):
    # per-row first j with t[i]-c[j] <= v
    n0 = c.size
    out = np.empty(t.size, dtype=np.int64)
    j = 0
    for i in range(t.size):
        while j < n0 and t[i] - c[j] > v:
            j += 1
        out[i] = j
    return out


@numba.njit(cache=True)
def _pairs_window(t, c, lo, hi, size):
    # all differences in (lo, hi], using monotone row boundaries
    a = _first_le(t, c, hi)
    b = _first_le(t, c, lo)
    out = np.empty(size)
    k = 0
    for i in range(t.size):
        for j in range(a[i], b[i]):
            out[k] = t[i] - c[j]
            k += 1
    return out


def pairwise_kth(treated, control, k: int) -> float:
    """The k-th smallest (1-based) of all differences ``t - c``.

    Works in value space: bisect on a threshold while counting pairs below
    it with a two-pointer sweep over the sorted arms, then enumerate the few
    pairs left in the final bracket. No more than ``O(n0 + n1)`` differences
    are held in memory. Differences are computed as ``t - c`` exactly as a
    brute-force enumeration would, so the result is bit-identical to it.
    """
    t = np.ascontiguousarray(treated, dtype=float)
    c = np.ascontiguousarray(control, dtype=float)
    total = t.size * c.size
    if not 1 <= k <= total:
        raise ValueError(f"k={k} outside 1..{total}")
    hi = t[-1] - c[0]
    lo = np.nextafter(t[0] - c[-1], -np.inf)
    n_lo, n_hi = 0, total
    budget = max(t.size + c.size, 64)
    while n_hi - n_lo > budget:
        mid = lo + (hi - lo) / 2
        if not lo < mid < hi:
            # no representable value strictly inside: every pair left equals hi
            return float(hi)
        n_mid = _count_le(t, c, mid)
        if n_mid >= k:
            hi, n_hi = mid, n_mid
        else:
            lo, n_lo = mid, n_mid
    window = np.sort(_pairs_window(t, c, lo, hi, n_hi - n_lo))
    return float(window[k - n_lo - 1])


def hl_point(treated, control) -> float:
    """Median of all pairwise differences (midpoint of the two central ones when even)."""
    total = len(treated) * len(control)
    if total % 2:
        return pairwise_kth(treated, control, (total + 1) // 2)
    a = pairwise_kth(treated, control, total // 2)
    b = pairwise_kth(treated, control, total // 2 + 1)
    return (a + b) / 2


def hodges_lehmann(
    view: TwoSampleView,
    *,
    variance: str = "bootstrap",
    fit0: DensityFit | None = None,
    boot_m: int | None = None,
    boot_B: int = 200,
    seed: int = 0,
) -> Estimate:
    """Hodges-Lehmann shift estimate.

    Parameters
    ----------
    variance : {"bootstrap", "analytic", "none"}
        ``"bootstrap"`` uses the m-out-of-n bootstrap; ``"analytic"`` the
        rank-theory plug-in ``1 / (12 p (1-p) n (int f^2)^2)`` with the
        control-arm density fit.
    """
    tau = hl_point(view.treated, view.control)
    diag = {"variance_source": variance}
    if variance == "analytic":
        fit0 = fit0 if fit0 is not None else view.control_fit
        r = fit0.integral_sq()
        if not r > 0:
            raise DegenerateDensityError("integral of squared density is zero")
        var = 1 / (12 * view.p * (1 - view.p) * view.n * r**2)
    elif variance == "bootstrap":
        from .inference import m_of_n_bootstrap_var

        m = boot_m if boot_m is not None else min(view.n, 2000)
        var = m_of_n_bootstrap_var(
            view, lambda v: hl_point(v.treated, v.control), m=m, B=boot_B, seed=seed
        )
        diag.update(boot_m=m, boot_B=boot_B)
    elif variance == "none":
        var = None
    else:
        raise ValueError(f"unknown variance option {variance!r}")
    return Estimate(tau, var, "hl", diag)
