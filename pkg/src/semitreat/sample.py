"""Two-arm sample representation and empirical quantile primitives."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterable, Mapping

import numpy as np

from .exceptions import (
    BadIndicatorError,
    BadQuantileError,
    EmptyArmError,
    NonFiniteError,
)

__all__ = [
    "TwoSampleView",
    "Estimate",
    "split_sample",
    "from_arms",
    "empirical_quantile",
    "quantile_index",
    "qte_curve",
]


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TwoSampleView:
    """Sorted outcomes of a completely randomized two-arm experiment.

    Use :func:`split_sample` or :func:`from_arms` rather than the constructor;
    they validate and sort the arms.

    Attributes
    ----------
    control, treated : ndarray
        Read-only, ascending outcome arrays.
    """

    control: np.ndarray
    treated: np.ndarray

    @property
    def n0(self) -> int:
        return self.control.size

    @property
    def n1(self) -> int:
        return self.treated.size

    @property
    def n(self) -> int:
        return self.n0 + self.n1

    @property
    def p(self) -> float:
        return self.n1 / self.n

    def arm(self, z: int) -> np.ndarray:
        return self.treated if z else self.control

    def swapped(self) -> "TwoSampleView":
        """View with the roles of the arms exchanged."""
        return TwoSampleView(self.treated, self.control)

    def map(self, fn) -> "TwoSampleView":
        """Apply a monotone increasing transform to both arms."""
        return from_arms(fn(self.control), fn(self.treated))

    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Pooled ``(y, z)`` arrays, control first."""
        y = np.concatenate([self.control, self.treated])
        z = np.concatenate([np.zeros(self.n0, dtype=int), np.ones(self.n1, dtype=int)])
        return y, z

    # Density fits are expensive and shared by several estimators, so the
    # default-configured fits are computed at most once per view.
    @cached_property
    def control_fit(self):
        from .density import fit_adaptive_density

        return fit_adaptive_density(self.control)

    @cached_property
    def treated_fit(self):
        from .density import fit_adaptive_density

        return fit_adaptive_density(self.treated)


@dataclass
class Estimate:
    """Point estimate with an optional variance and diagnostics.

    Attributes
    ----------
    tau_hat : float
        Point estimate in outcome units.
    var_hat : float or None
        Estimated sampling variance of ``tau_hat``.
    method : str
        Name of the estimator that produced the value.
    diagnostics : dict
        Method-specific details (weights, trim fractions, iterations, ...).
    """

    tau_hat: float
    var_hat: float | None
    method: str
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.tau_hat = float(self.tau_hat)
        if self.var_hat is not None:
            self.var_hat = float(self.var_hat)
            if not self.var_hat >= 0:
                raise ValueError(f"negative or NaN variance {self.var_hat!r}")

    @property
    def se(self) -> float | None:
        return None if self.var_hat is None else math.sqrt(self.var_hat)

    def to_dict(self) -> Mapping[str, Any]:
        return {
            "estimator": self.method,
            "tau_hat": self.tau_hat,
            "var_hat": self.var_hat,
            "diagnostics": self.diagnostics,
        }


def _check_finite(y: np.ndarray):
    if not np.all(np.isfinite(y)):
        raise NonFiniteError("outcomes must be finite (found NaN or infinity)")


def from_arms(control: Iterable[float], treated: Iterable[float]) -> TwoSampleView:
    """Build a view from separate control and treated outcome arrays."""
    c = np.asarray(control, dtype=float).ravel()
    t = np.asarray(treated, dtype=float).ravel()
    if c.size == 0 or t.size == 0:
        raise EmptyArmError(f"both arms need at least one unit (n0={c.size}, n1={t.size})")
    _check_finite(c)
    _check_finite(t)
    return TwoSampleView(_frozen(np.sort(c, kind="stable")), _frozen(np.sort(t, kind="stable")))


def split_sample(y, z=None) -> TwoSampleView:
    """Split observed outcomes into a sorted two-arm view.

    Parameters
    ----------
    y : array_like
        Outcomes, or a sequence of ``(y, z)`` pairs when `z` is omitted.
    z : array_like of {0, 1}, optional
        Treatment indicators.

    Returns
    -------
    TwoSampleView

    Raises
    ------
    BadIndicatorError
        If an indicator is not 0 or 1.
    NonFiniteError
        If an outcome is NaN or infinite.
    EmptyArmError
        If an arm has no units.
    """
    if z is None:
        pairs = np.asarray(y, dtype=float)
        if pairs.ndim != 2 or pairs.shape[1] != 2:
            if pairs.size == 0:
                raise EmptyArmError("no observations")
            raise ValueError("expected a sequence of (y, z) pairs")
        y, z = pairs[:, 0], pairs[:, 1]
    y = np.asarray(y, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    if y.shape != z.shape:
        raise ValueError(f"y and z differ in length ({y.size} vs {z.size})")
    bad = ~np.isin(z, (0.0, 1.0))
    if bad.any():
        raise BadIndicatorError(f"treatment indicator must be 0 or 1, got {float(z[bad][0])!r}")
    _check_finite(y)
    return from_arms(y[z == 0], y[z == 1])


def quantile_index(m: int, u) -> np.ndarray:
    """Zero-based index of the ``ceil(m*u)``-th order statistic, clamped."""
    k = np.ceil(np.multiply(m, u)).astype(np.int64)
    return np.clip(k, 1, m) - 1


def empirical_quantile(arm, u):
    """The ``ceil(m*u)``-th order statistic of a sorted arm.

    No interpolation is done between order statistics.

    Parameters
    ----------
    arm : array_like
        Ascending sample of length ``m >= 1``.
    u : float or array_like
        Levels in ``(0, 1]``.

    Raises
    ------
    BadQuantileError
        If any level lies outside ``(0, 1]``.
    """
    arm = np.asarray(arm)
    u_arr = np.asarray(u, dtype=float)
    if np.any(~(u_arr > 0)) or np.any(~(u_arr <= 1)):
        raise BadQuantileError(f"quantile level must lie in (0, 1], got {u!r}")
    out = arm[quantile_index(arm.size, u_arr)]
    return float(out) if np.ndim(out) == 0 else out


def qte_curve(view: TwoSampleView, grid) -> np.ndarray:
    """Empirical quantile treatment effects on a grid of levels.

    Returns an ``(len(grid), 2)`` array of ``(u, delta_hat(u))`` rows.
    """
    u = np.atleast_1d(np.asarray(grid, dtype=float))
    if np.any(u >= 1):
        raise BadQuantileError("grid levels must lie in (0, 1)")
    delta = empirical_quantile(view.treated, u) - empirical_quantile(view.control, u)
    return np.column_stack([u, delta])
