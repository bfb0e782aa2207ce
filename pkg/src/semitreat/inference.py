"""Wald intervals and the m-out-of-n bootstrap variance."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .exceptions import MissingVarianceError, ResampleFailureError, SemitreatError
from .sample import Estimate, TwoSampleView, from_arms

__all__ = ["ConfidenceInterval", "normal_ci", "m_of_n_bootstrap_var"]


@dataclass(frozen=True)
class ConfidenceInterval:
    lo: float
    hi: float
    level: float
    source: str = "analytic"

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"interval bounds out of order: {self.lo} > {self.hi}")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def covers(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    def to_dict(self):
        return {"lo": self.lo, "hi": self.hi, "level": self.level, "source": self.source}


def normal_ci(est: Estimate, level: float = 0.95, source: str = "analytic") -> ConfidenceInterval:
    """Symmetric normal-approximation interval ``tau_hat +- z * se``."""
    if est.var_hat is None:
        raise MissingVarianceError(f"estimate from {est.method!r} has no variance")
    if not 0 < level < 1:
        raise ValueError(f"level must lie in (0, 1), got {level!r}")
    half = special.ndtri((1 + level) / 2) * np.sqrt(est.var_hat)
    return ConfidenceInterval(est.tau_hat - half, est.tau_hat + half, level, source)


def m_of_n_bootstrap_var(
    view: TwoSampleView,
    estimator: Callable[[TwoSampleView], float | Estimate],
    m: int = 2000,
    B: int = 200,
    seed: int = 0,
    *,
    max_fail: float = 0.10,
) -> float:
    """Variance of an estimator by the m-out-of-n bootstrap.

    Each replicate draws ``round(m*p)`` treated and ``m - round(m*p)``
    control outcomes with replacement within arm. The spread of the replicate
    estimates is rescaled by ``m/n`` to the full sample size.

    Parameters
    ----------
    view : TwoSampleView
    estimator : callable
        Maps a view to a float or an :class:`Estimate`.
    m : int
        Resample size, ``m <= n``.
    B : int
        Number of replicates, at least 50.
    seed : int
        Replicate ``b`` uses the generator ``default_rng([seed, b])``.

    Raises
    ------
    ResampleFailureError
        When more than `max_fail` of the replicates raise an estimation error.
    """
    n = view.n
    if not 2 <= m <= n:
        raise ValueError(f"resample size must satisfy 2 <= m <= n={n}, got {m}")
    if B < 50:
        raise ValueError(f"need at least 50 bootstrap replicates, got {B}")
    m1 = min(max(int(round(m * view.p)), 1), m - 1)
    m0 = m - m1
    values = []
    failures = 0
    for b in range(B):
        rng = np.random.default_rng([seed, b])
        c = view.control[rng.integers(0, view.n0, m0)]
        t = view.treated[rng.integers(0, view.n1, m1)]
        try:
            out = estimator(from_arms(c, t))
        except (SemitreatError, ArithmeticError, ValueError):
            failures += 1
            continue
        values.append(out.tau_hat if isinstance(out, Estimate) else float(out))
    if failures > max_fail * B or len(values) < 2:
        raise ResampleFailureError(f"estimator failed on {failures} of {B} resamples")
    return float(m / n * np.var(values, ddof=1))
