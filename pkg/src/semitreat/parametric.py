"""Parametric unit-level treatment effects ``Y(1) = h(Y(0), theta)``.

The control density is left unrestricted; ``h`` is strictly increasing in
its first argument. The efficient score for ``theta`` is

    g(y, theta) = d/dtheta log( f0(h^-1(y, theta)) * d/dy h^-1(y, theta) ),

the derivative of the log density of a treated outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from .density import (
    DENSITY_FLOOR,
    DensityFit,
    eval_density,
    eval_lpsi,
    fit_adaptive_density,
    log_density,
)
from .exceptions import (
    BadParamsError,
    DegenerateDensityError,
    DegenerateInfoError,
    NoSolutionError,
)
from .sample import Estimate, TwoSampleView, empirical_quantile
from .shift import split_halves

__all__ = [
    "TreatmentModel",
    "additive_model",
    "multiplicative_model",
    "get_model",
    "quantile_match_init",
    "score_g",
    "score_g_numeric",
    "info_hat",
    "one_step_theta",
    "in_sample_ate",
    "population_ate",
    "LevelEffect",
    "level_from_log",
]

Array = np.ndarray


@dataclass(frozen=True)
class TreatmentModel:
    """A map ``h(y, theta)`` from control to treated potential outcomes.

    Parameters
    ----------
    h, h_inv : callable
        ``h(y, theta)`` and its inverse in ``y``.
    dh_inv_dy : callable
        Derivative of ``h_inv`` in ``y``; must be positive.
    dim : int
        Length of ``theta``.
    dtheta_h_inv, dtheta_log_jac : callable, optional
        Analytic ``theta``-derivatives of ``h_inv`` and of
        ``log dh_inv_dy``. Without both, scores are differentiated
        numerically.
    dtheta_score : callable, optional
        ``(fit, y, theta) -> d g / d theta`` for scalar ``theta``.
    solve : callable, optional
        Closed-form solution of ``h(q0, theta) = q1`` for ``dim == 1``.
    theta0 : float
        Identity parameter, used to start the quantile matching search.
    positive : bool
        Whether outcomes must be positive.
    check_grid : array_like, optional
        If given together with `check_theta`, monotonicity and the round
        trip ``h(h_inv(y)) = y`` are verified at construction.
    """

    h: Callable
    h_inv: Callable
    dh_inv_dy: Callable
    dim: int = 1
    dtheta_h_inv: Callable | None = None
    dtheta_log_jac: Callable | None = None
    dtheta_score: Callable | None = None
    solve: Callable | None = None
    theta0: float = 0.0
    positive: bool = False
    name: str = "custom"
    check_grid: object = field(default=None, repr=False)
    check_theta: object = field(default=None, repr=False)

    def __post_init__(self):
        if self.dim < 1:
            raise BadParamsError(f"theta dimension must be positive, got {self.dim}")
        if self.check_grid is not None and self.check_theta is not None:
            self.validate(self.check_grid, self.check_theta)

    @property
    def analytic(self) -> bool:
        return self.dtheta_h_inv is not None and self.dtheta_log_jac is not None

    def validate(self, grid, theta, rtol: float = 1e-9):
        """Check ``dh/dy > 0`` and the inverse round trip on `grid`."""
        y = np.asarray(grid, dtype=float)
        hy = np.asarray(self.h(y, theta), dtype=float)
        if np.any(np.diff(hy) <= 0) or np.any(np.asarray(self.dh_inv_dy(hy, theta)) <= 0):
            raise BadParamsError("h must be strictly increasing in y")
        back = np.asarray(self.h(self.h_inv(y, theta), theta), dtype=float)
        if not np.allclose(back, y, rtol=rtol, atol=rtol * np.max(np.abs(y))):
            raise BadParamsError("h_inv is not the inverse of h on the check grid")


def additive_model() -> TreatmentModel:
    """``h(y, theta) = y + theta``: a constant shift."""
    return TreatmentModel(
        h=lambda y, t: y + t,
        h_inv=lambda y, t: y - t,
        dh_inv_dy=lambda y, t: np.ones_like(np.asarray(y, dtype=float)),
        dtheta_h_inv=lambda y, t: -np.ones_like(np.asarray(y, dtype=float)),
        dtheta_log_jac=lambda y, t: np.zeros_like(np.asarray(y, dtype=float)),
        dtheta_score=lambda fit, y, t: eval_lpsi(fit, np.asarray(y) - t, 2),
        solve=lambda q0, q1: q1 - q0,
        theta0=0.0,
        name="additive",
    )


def _mult_dscore(fit, y, t):
    v = np.asarray(y, dtype=float) / t
    return (1 + 2 * v * eval_lpsi(fit, v, 1) + v * v * eval_lpsi(fit, v, 2)) / t**2


def multiplicative_model() -> TreatmentModel:
    """``h(y, theta) = theta * y`` with ``theta > 0`` and positive outcomes."""
    return TreatmentModel(
        h=lambda y, t: t * y,
        h_inv=lambda y, t: y / t,
        dh_inv_dy=lambda y, t: np.full(np.shape(y), 1.0 / t),
        dtheta_h_inv=lambda y, t: -np.asarray(y, dtype=float) / t**2,
        dtheta_log_jac=lambda y, t: np.full(np.shape(y), -1.0 / t),
        dtheta_score=_mult_dscore,
        solve=lambda q0, q1: q1 / q0,
        theta0=1.0,
        positive=True,
        name="multiplicative",
    )


def get_model(name: str) -> TreatmentModel:
    if name == "additive":
        return additive_model()
    if name == "multiplicative":
        return multiplicative_model()
    raise BadParamsError(f"unknown treatment model {name!r}")


def _scalar(theta):
    t = np.asarray(theta, dtype=float)
    return float(t.reshape(-1)[0]) if t.size == 1 else t


def quantile_match_init(view: TwoSampleView, model: TreatmentModel, u_list=(0.5,)):
    """Starting value matching ``d`` treated and control sample quantiles.

    Solves ``F1^-1(u_j) = h(F0^-1(u_j), theta)`` for ``j = 1..d``. A scalar
    parameter is found by bracketing; vectors by damped Newton steps with a
    forward-difference Jacobian.

    Raises
    ------
    NoSolutionError
        If no solution is found within the iteration cap.
    """
    u = np.atleast_1d(np.asarray(u_list, dtype=float))
    if u.size != model.dim:
        raise BadParamsError(f"need {model.dim} quantile levels, got {u.size}")
    if u.size > 1 and np.any(np.diff(u) <= 0):
        raise BadParamsError("quantile levels must be strictly increasing")
    q0 = np.atleast_1d(empirical_quantile(view.control, u))
    q1 = np.atleast_1d(empirical_quantile(view.treated, u))

    if model.dim == 1:
        if model.solve is not None:
            return float(model.solve(q0[0], q1[0]))

        def r(t):
            return float(model.h(q0[0], t) - q1[0])

        t0 = float(model.theta0)
        r0 = r(t0)
        if r0 == 0:
            return t0
        d = 1e-3 * (1 + abs(t0))
        for _ in range(200):
            for t in (t0 - d, t0 + d):
                try:
                    rt = r(t)
                except (ValueError, ZeroDivisionError, FloatingPointError):
                    continue
                if np.isfinite(rt) and np.sign(rt) != np.sign(r0):
                    return float(optimize.brentq(r, min(t, t0), max(t, t0), xtol=1e-14))
            d *= 2
        raise NoSolutionError("no sign change of the quantile residual")

    def resid(t):
        return np.asarray(model.h(q0, t), dtype=float) - q1

    theta = np.broadcast_to(np.asarray(model.theta0, dtype=float), (model.dim,)).copy()
    res = resid(theta)
    for _ in range(100):
        norm = np.linalg.norm(res)
        if norm < 1e-10:
            return theta
        jac = np.empty((model.dim, model.dim))
        for k in range(model.dim):
            e = np.zeros(model.dim)
            e[k] = 1e-7 * (1 + abs(theta[k]))
            jac[:, k] = (resid(theta + e) - res) / e[k]
        try:
            step = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError as exc:
            raise NoSolutionError("singular Jacobian in quantile matching") from exc
        lam = 1.0
        while lam > 1e-8:
            cand = theta + lam * step
            rc = resid(cand)
            if np.all(np.isfinite(rc)) and np.linalg.norm(rc) < norm:
                theta, res = cand, rc
                break
            lam /= 2
        else:
            break
    if np.linalg.norm(res) < 1e-10:
        return theta
    raise NoSolutionError(f"quantile matching residual {np.linalg.norm(res):.3g} after 100 iterations")


def _log_f1(fit: DensityFit, model: TreatmentModel, y, theta):
    return log_density(fit, model.h_inv(y, theta)) + np.log(model.dh_inv_dy(y, theta))


def score_g_numeric(fit0: DensityFit, model: TreatmentModel, theta, y):
    """Score by centred differences of ``log f1(y, theta)`` in ``theta``.

    The log density is the antiderivative of the interpolated log-density
    derivative, so this matches :func:`score_g` up to differencing error.
    Returns shape ``y.shape`` for scalar ``theta`` and ``y.shape + (d,)``
    otherwise.
    """
    y = np.asarray(y, dtype=float)
    t = np.atleast_1d(np.asarray(theta, dtype=float))
    out = np.empty(y.shape + (t.size,))
    for k in range(t.size):
        step = 1e-5 * (1 + abs(t[k]))
        up, dn = t.copy(), t.copy()
        up[k] += step
        dn[k] -= step
        out[..., k] = (_log_f1(fit0, model, y, _scalar(up)) - _log_f1(fit0, model, y, _scalar(dn))) / (2 * step)
    return out[..., 0] if t.size == 1 else out


def score_g(fit0: DensityFit, model: TreatmentModel, theta, y):
    """Efficient score ``g(y, theta)`` of the treated-outcome density.

    Uses the interpolated ``lpsi1`` of `fit0` and the model's analytic
    ``theta``-derivatives when available, else :func:`score_g_numeric`.

    Raises
    ------
    DegenerateDensityError
        If the fitted control density vanishes at every evaluation point.
    """
    y = np.asarray(y, dtype=float)
    x = model.h_inv(y, _scalar(theta))
    if np.all(eval_density(fit0, np.atleast_1d(x)) <= 10 * DENSITY_FLOOR):
        raise DegenerateDensityError("control density estimate is zero at all evaluation points")
    if not model.analytic:
        return score_g_numeric(fit0, model, theta, y)
    t = _scalar(theta)
    return eval_lpsi(fit0, x, 1) * model.dtheta_h_inv(y, t) + model.dtheta_log_jac(y, t)


def _dscore(fit0, model, theta, y):
    if model.dtheta_score is not None and model.dim == 1:
        return np.asarray(model.dtheta_score(fit0, y, _scalar(theta)), dtype=float)
    t = float(np.asarray(theta))
    step = 1e-5 * (1 + abs(t))
    return (score_g(fit0, model, t + step, y) - score_g(fit0, model, t - step, y)) / (2 * step)


def info_hat(fit0: DensityFit, model: TreatmentModel, theta, control, info: str = "score"):
    """Plug-in information for ``theta`` averaged over the control arm.

    ``info="score"`` averages ``g(h(Y0, theta), theta)**2`` (outer product
    for vector ``theta``); ``info="hessian"`` averages ``-dg/dtheta``,
    which for the additive model is the shift-model ``-mean(lpsi2(Y0))``.
    """
    t = _scalar(theta)
    y1 = model.h(np.asarray(control, dtype=float), t)
    if info == "score":
        g = score_g(fit0, model, t, y1)
        if model.dim == 1:
            return float(np.mean(g * g))
        g = g.reshape(-1, model.dim)
        return g.T @ g / g.shape[0]
    if info == "hessian":
        if model.dim != 1:
            raise BadParamsError("hessian information is implemented for scalar theta only")
        return float(-np.mean(_dscore(fit0, model, t, y1)))
    raise ValueError(f"info must be 'score' or 'hessian', got {info!r}")


def _check_info(mat):
    m = np.atleast_2d(mat)
    if not np.all(np.isfinite(m)) or np.any(np.linalg.eigvalsh((m + m.T) / 2) <= 0):
        raise DegenerateInfoError("estimated information is not positive definite")


def _score_sums(fit, model, theta, half: TwoSampleView, p: float):
    t = _scalar(theta)
    gt = score_g(fit, model, t, half.treated)
    gc = score_g(fit, model, t, model.h(half.control, t))
    return gt.sum(axis=0) / p - gc.sum(axis=0) / (1 - p)


def one_step_theta(
    view: TwoSampleView,
    theta_init,
    model: TreatmentModel,
    split: bool = False,
    seed: int = 0,
    *,
    fit0: DensityFit | None = None,
    info: str = "score",
) -> Estimate:
    """One-step efficient estimate of ``theta``.

    ``theta = theta_init + I^-1 (1/n) sum[(z/p) g(y) - ((1-z)/(1-p)) g(h(y))]``
    with the information ``I`` from :func:`info_hat`. The variance is
    ``I^-1 / (p (1-p) n)``.

    Parameters
    ----------
    view : TwoSampleView
    theta_init : float or array_like
        Starting value, for example from :func:`quantile_match_init`.
    model : TreatmentModel
    split : bool, default False
        Cross-fit the control density on random halves (same halves as the
        shift estimators for a given `seed`).
    fit0 : DensityFit, optional
        Control-arm fit for the full-sample path.
    info : {"score", "hessian"}
        Information estimate; see :func:`info_hat`.

    Raises
    ------
    DegenerateInfoError
        If the information is not positive definite.
    """
    n, p = view.n, view.p
    t0 = _scalar(theta_init)
    if split:
        a, b = split_halves(view, seed)
        pieces = []
        for half, other in ((a, b), (b, a)):
            fit = fit_adaptive_density(other.control)
            ih = info_hat(fit, model, t0, other.control, info)
            _check_info(ih)
            pieces.append((np.linalg.solve(np.atleast_2d(ih), np.atleast_1d(_score_sums(fit, model, t0, half, p))), ih))
        upd = (pieces[0][0] + pieces[1][0]) / n
        imat = (np.atleast_2d(pieces[0][1]) + np.atleast_2d(pieces[1][1])) / 2
    else:
        if fit0 is None:
            fit0 = view.control_fit
        imat = np.atleast_2d(info_hat(fit0, model, t0, view.control, info))
        _check_info(imat)
        s = np.atleast_1d(_score_sums(fit0, model, t0, view, p)) / n
        upd = s / imat[0, 0] if model.dim == 1 else np.linalg.solve(imat, s)
    theta = np.atleast_1d(t0) + upd
    cov = np.linalg.inv(imat) / (p * (1 - p) * n)
    diag = {"theta_init": t0, "info": info, "split": split, "model": model.name}
    if model.dim == 1:
        return Estimate(float(theta[0]), float(cov[0, 0]), "parametric", diag)
    diag["theta"] = theta
    diag["cov"] = cov
    return Estimate(float(theta[0]), float(cov[0, 0]), "parametric", diag)


def in_sample_ate(view: TwoSampleView, model: TreatmentModel, theta) -> float:
    """Average over all units of the imputed unit-level effect."""
    t = _scalar(theta)
    treated = np.sum(view.treated - model.h_inv(view.treated, t))
    control = np.sum(model.h(view.control, t) - view.control)
    return float((treated + control) / view.n)


def population_ate(control, model: TreatmentModel, theta) -> float:
    """``mean(h(Y0, theta) - Y0)`` over the control arm."""
    c = np.asarray(control, dtype=float)
    return float(np.mean(model.h(c, _scalar(theta)) - c))


@dataclass(frozen=True)
class LevelEffect:
    """Level-scale effect translated from an effect on log outcomes."""

    tau: float
    var: float
    tau_log: float
    mu0: float
    mu1: float
    p: float

    def __post_init__(self):
        if not self.var >= 0:
            raise ValueError(f"variance must be non-negative, got {self.var!r}")


def level_from_log(tau_log: float, mu0: float, mu1: float, p: float, V: float) -> LevelEffect:
    """Translate a log-scale shift to a level effect with a delta-method variance.

    ``tau = (1-p)(e^t - 1) mu0 + p (1 - e^-t) mu1`` and
    ``var = ((1-p) e^t mu0 + p e^-t mu1)^2 V``.
    """
    if not (math.isfinite(mu0) and math.isfinite(mu1)):
        raise BadParamsError("arm means must be finite")
    if not 0 < p < 1:
        raise BadParamsError(f"p must lie in (0, 1), got {p!r}")
    if not V >= 0:
        raise BadParamsError(f"V must be non-negative, got {V!r}")
    up, down = math.exp(tau_log), math.exp(-tau_log)
    tau = (1 - p) * (up - 1) * mu0 + p * (1 - down) * mu1
    grad = (1 - p) * up * mu0 + p * down * mu1
    return LevelEffect(tau, grad * grad * V, tau_log, mu0, mu1, p)
