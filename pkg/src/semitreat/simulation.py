"""Monte Carlo studies and quadrature oracles for quantile-weighted estimators.

An L-estimator ``int (F1^-1 - F0^-1) dW`` has asymptotic variance

    sigma^2(F, W) = int int (min(s, t) - s t) / (f(F^-1 s) f(F^-1 t)) dW(s) dW(t)

per arm. The oracles here evaluate it, and the influence function of a
weight measure, by adaptive quadrature after the substitution
``s = F(x)``, which removes the density from the denominator.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate

from .estimators import ESTIMATOR_NAMES, estimate_with_ci
from .exceptions import (
    BadLawError,
    BadParamsError,
    EstimationError,
    InputError,
    NonIntegrableError,
    SemitreatError,
)
from .laws import EmpiricalLaw, Law, get_law
from .sample import from_arms

__all__ = [
    "WeightMeasure",
    "efficiency_bound",
    "sigma_f2_quadrature",
    "trim_sigma2_population",
    "psi_from_W",
    "W_from_psi",
    "ScenarioSpec",
    "EstimatorSummary",
    "MonteCarloReport",
    "run_scenario",
    "load_scenario",
]


@dataclass(frozen=True)
class WeightMeasure:
    """A finite measure on ``(0, 1)``: a density on ``[lo, hi]`` plus atoms.

    Parameters
    ----------
    density : callable or None
        ``u -> w(u)``; zero outside ``[lo, hi]``.
    atoms : tuple of (u, mass)
    lo, hi : float
        Support of the density part.
    """

    density: Callable | None = None
    atoms: tuple = ()
    lo: float = 0.0
    hi: float = 1.0

    @classmethod
    def uniform(cls, lo: float = 0.0, hi: float = 1.0) -> "WeightMeasure":
        width = hi - lo
        return cls(lambda u: np.full(np.shape(u), 1.0 / width), (), lo, hi)

    @classmethod
    def trim(cls, alpha: float, beta: float) -> "WeightMeasure":
        """Uniform weight of the ``(alpha, beta)``-trimmed mean."""
        return cls.uniform(alpha, 1 - beta)

    @classmethod
    def point(cls, u: float, mass: float = 1.0) -> "WeightMeasure":
        return cls(None, ((float(u), float(mass)),))

    @classmethod
    def efficient(cls, law: Law) -> "WeightMeasure":
        """The efficient weight measure of `law`."""
        atoms = tuple(law.weight_atoms)
        if atoms and not np.any(law.efficient_weight(np.linspace(0.01, 0.99, 99))):
            return cls(None, atoms)
        lo, hi = 0.0, 1.0
        if hasattr(law, "alpha") and hasattr(law, "beta"):
            lo, hi = law.alpha, 1 - law.beta
        return cls(law.efficient_weight, atoms, lo, hi)


def _law(law, **params) -> Law:
    if isinstance(law, str):
        law = get_law(law, **params)
    return law


def efficiency_bound(law, p: float, n: int, **params) -> float:
    """Smallest asymptotic variance ``1 / (p (1-p) I n)`` for a shift.

    Parameters
    ----------
    law : str or Law or EmpiricalLaw
        ``huber`` needs ``k1`` and ``k2``; an empirical law uses the plug-in
        information of a density fit to the whole population.
    p : float
        Treated fraction.
    n : int
        Total sample size.
    """
    law = _law(law, **params)
    if not 0 < p < 1:
        raise BadParamsError(f"p must lie in (0, 1), got {p!r}")
    info = law.information
    if not info > 0:
        raise BadLawError("law has no positive Fisher information")
    return 1.0 / (p * (1 - p) * info * n)


def _quad(fn, a, b, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(fn, a, b, limit=200, **kw)
        except integrate.IntegrationWarning as exc:
            raise NonIntegrableError(f"quadrature did not converge: {exc}") from exc
    if not np.isfinite(val):
        raise NonIntegrableError("quadrature returned a non-finite value")
    return val


def _x_range(law: Law, W: WeightMeasure):
    lo = -np.inf if W.lo <= 0 else float(law.ppf(W.lo))
    hi = np.inf if W.hi >= 1 else float(law.ppf(W.hi))
    return lo, hi


def _breaks(lo, hi, pts):
    inner = sorted(p for p in pts if lo < p < hi)
    edges = [lo, *inner, hi]
    return list(zip(edges[:-1], edges[1:]))


def _kinks(law) -> list[float]:
    if hasattr(law, "k1"):
        return [law.mu - law.sigma * law.k1, law.mu + law.sigma * law.k2]
    return [0.0]


def _piecewise(fn, lo, hi, pts, **kw):
    return sum(_quad(fn, a, b, **kw) for a, b in _breaks(lo, hi, pts))


def sigma_f2_quadrature(law, W: WeightMeasure, *, epsabs: float = 1e-13, epsrel: float = 1e-11) -> float:
    """Asymptotic variance of ``int F^-1 dW`` by adaptive quadrature.

    The density part is integrated in ``x = F^-1(s)`` coordinates over the
    triangle ``x < y`` (the kernel is symmetric). Atoms enter through
    direct summation and one-dimensional cross terms.

    Raises
    ------
    NonIntegrableError
        When an integral fails to converge.
    """
    law = _law(law)
    total = 0.0
    kinks = _kinks(law)
    if W.density is not None:
        lo, hi = _x_range(law, W)

        def wx(x):
            return float(W.density(law.cdf(x)))

        def inner(y):
            return _piecewise(lambda x: float(law.cdf(x)) * wx(x), lo, y, kinks, epsabs=epsabs, epsrel=epsrel)

        def outer(y):
            return (1 - float(law.cdf(y))) * wx(y) * inner(y)

        total += 2 * _piecewise(outer, lo, hi, kinks, epsabs=epsabs, epsrel=epsrel)

        for u, mass in W.atoms:
            a = mass / float(law.pdf(law.ppf(u)))
            total += 2 * a * _piecewise(
                lambda x, u=u: (min(float(law.cdf(x)), u) - float(law.cdf(x)) * u) * wx(x),
                lo, hi, kinks + [float(law.ppf(u))], epsabs=epsabs, epsrel=epsrel,
            )
    for u, m in W.atoms:
        for v, k in W.atoms:
            a = m / float(law.pdf(law.ppf(u)))
            b = k / float(law.pdf(law.ppf(v)))
            total += a * b * (min(u, v) - u * v)
    return float(total)


def trim_sigma2_population(law, alpha: float, beta: float) -> float:
    """Population variance of the ``(alpha, beta)``-trimmed mean of one arm."""
    return sigma_f2_quadrature(law, WeightMeasure.trim(alpha, beta))


def psi_from_W(law, W: WeightMeasure, x, *, epsabs: float = 1e-12, epsrel: float = 1e-10):
    """Influence function ``-int (1{F(x) <= t} - t) / f(F^-1 t) dW(t)``.

    Vectorized over `x` by looping; each point costs two quadratures.
    """
    law = _law(law)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.zeros(xs.shape)
    kinks = _kinks(law)
    if W.density is not None:
        lo, hi = _x_range(law, W)

        def wx(y):
            return float(W.density(law.cdf(y)))

        for j, xv in enumerate(xs):
            c = min(max(xv, lo), hi)
            below = _piecewise(lambda y: float(law.cdf(y)) * wx(y), lo, c, kinks, epsabs=epsabs, epsrel=epsrel)
            above = _piecewise(lambda y: (1 - float(law.cdf(y))) * wx(y), c, hi, kinks, epsabs=epsabs, epsrel=epsrel)
            out[j] = below - above
    Fx = law.cdf(xs)
    for u, mass in W.atoms:
        out -= mass * ((Fx <= u).astype(float) - u) / float(law.pdf(law.ppf(u)))
    return float(out[0]) if np.ndim(x) == 0 else out


def W_from_psi(law, psi: Callable, t, *, dpsi: Callable | None = None, epsabs: float = 1e-10, epsrel: float = 1e-8):
    """Cumulative weight ``W(t)`` recovered from a differentiable influence function.

    ``W(t) = int_0^t psi'(F^-1 u) du / int_0^1 psi'(F^-1 u) du``, computed as
    integrals of ``psi' f`` in ``x`` coordinates. Without `dpsi`, the
    derivative is a centred difference of `psi`.
    """
    law = _law(law)
    if dpsi is None:

        def dpsi(x):
            h = 1e-4 * (1 + abs(x))
            return (psi(x + h) - psi(x - h)) / (2 * h)

    def integrand(x):
        return float(dpsi(x)) * float(law.pdf(x))

    kinks = _kinks(law)
    total = _piecewise(integrand, -np.inf, np.inf, kinks, epsabs=epsabs, epsrel=epsrel)
    if total == 0:
        raise NonIntegrableError("psi' integrates to zero")
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.array([
        0.0 if tv <= 0 else 1.0 if tv >= 1
        else _piecewise(integrand, -np.inf, float(law.ppf(tv)), kinks, epsabs=epsabs, epsrel=epsrel) / total
        for tv in ts
    ])
    return float(out[0]) if np.ndim(t) == 0 else out


@dataclass
class ScenarioSpec:
    """Monte Carlo design.

    Attributes
    ----------
    law : str
        ``normal``, ``laplace``, ``cauchy``, ``huber`` or ``empirical``.
    n0, n1 : int
        Arm sizes (at least 100 each).
    shift : float
        Constant treatment effect added to treated draws.
    reps : int
        Number of replications.
    seed : int
        Replication ``r`` uses ``default_rng([seed, r])``.
    estimators : list of str
    ci : {"analytic", "bootstrap"}
    """

    law: str = "normal"
    n0: int = 10_000
    n1: int = 10_000
    shift: float = 0.0
    reps: int = 500
    seed: int = 0
    estimators: list = field(default_factory=lambda: ["means", "medians", "eif", "waq"])
    ci: str = "analytic"
    ci_level: float = 0.95
    k1: float | None = None
    k2: float | None = None
    empirical_file: str | None = None
    boot_m: int = 2000
    boot_B: int = 200
    trim_mode: str = "asymmetric"
    trim_range: tuple = (0.0, 0.495)
    eif_mode: str = "root"
    split: bool = False
    max_fail: float = 0.05

    def __post_init__(self):
        if int(self.reps) < 1:
            raise BadParamsError(f"reps must be at least 1, got {self.reps}")
        if int(self.n0) < 100 or int(self.n1) < 100:
            raise BadParamsError(f"arm sizes must be at least 100, got n0={self.n0}, n1={self.n1}")
        unknown = [e for e in self.estimators if e not in ESTIMATOR_NAMES]
        if unknown or not self.estimators:
            raise BadParamsError(f"unknown estimator(s) {unknown}; choose from {', '.join(ESTIMATOR_NAMES)}")
        if self.ci not in ("analytic", "bootstrap"):
            raise BadParamsError(f"ci must be 'analytic' or 'bootstrap', got {self.ci!r}")
        if not 0 < float(self.ci_level) < 1:
            raise BadParamsError(f"ci_level must lie in (0, 1), got {self.ci_level}")
        self.n0, self.n1, self.reps, self.seed = int(self.n0), int(self.n1), int(self.reps), int(self.seed)
        self.trim_range = tuple(float(a) for a in self.trim_range)
        self.estimators = list(self.estimators)

    def make_law(self):
        params = {"k1": self.k1, "k2": self.k2, "path": self.empirical_file}
        return get_law(self.law, **{k: v for k, v in params.items() if v is not None})


@dataclass
class EstimatorSummary:
    estimator: str
    bias: float
    sd: float
    relative_efficiency: float
    rmse: float
    mad: float
    coverage: float
    median_ci_length: float
    failures: int

    @classmethod
    def from_draws(cls, name, est, lo, hi, truth, bound, failures):
        est = np.asarray(est, dtype=float)
        err = est - truth
        sd = float(np.std(est, ddof=1)) if est.size > 1 else float("nan")
        ok = np.isfinite(lo) & np.isfinite(hi)
        cover = float(np.mean((lo[ok] <= truth) & (truth <= hi[ok]))) if ok.any() else float("nan")
        length = float(np.median(hi[ok] - lo[ok])) if ok.any() else float("nan")
        return cls(
            name,
            float(np.mean(err)),
            sd,
            sd / math.sqrt(bound),
            float(np.sqrt(np.mean(err**2))),
            float(np.median(np.abs(err))),
            cover,
            length,
            int(failures),
        )


@dataclass
class MonteCarloReport:
    """Per-estimator summaries of a scenario, with the draws kept for reuse."""

    spec: ScenarioSpec
    rows: list
    bound: float
    draws: dict = field(repr=False, default_factory=dict)
    wall_time: float = 0.0

    def row(self, name: str) -> EstimatorSummary:
        for r in self.rows:
            if r.estimator == name:
                return r
        raise KeyError(name)

    _COLUMNS = ("estimator", "bias", "sd", "relative_efficiency", "rmse", "mad",
                "coverage", "median_ci_length", "failures")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self._COLUMNS)
        for r in self.rows:
            d = asdict(r)
            w.writerow([d["estimator"]] + [repr(d[c]) if isinstance(d[c], float) else d[c] for c in self._COLUMNS[1:]])
        return buf.getvalue()

    def to_text(self) -> str:
        head = ["estimator", "bias", "sd", "rel.eff", "RMSE", "MAD", "coverage", "med.len", "fail"]
        lines = [[r.estimator, f"{r.bias:.4f}", f"{r.sd:.4f}", f"{r.relative_efficiency:.3f}",
                  f"{r.rmse:.4f}", f"{r.mad:.4f}", f"{r.coverage:.3f}", f"{r.median_ci_length:.4f}",
                  str(r.failures)] for r in self.rows]
        widths = [max(len(h), *(len(row[i]) for row in lines)) for i, h in enumerate(head)]
        fmt = lambda cells: "  ".join(c.rjust(wd) if i else c.ljust(wd) for i, (c, wd) in enumerate(zip(cells, widths)))
        s = self.spec
        title = (f"law={s.law} n0={s.n0} n1={s.n1} shift={s.shift} reps={s.reps} seed={s.seed} "
                 f"sqrt(bound)={math.sqrt(self.bound):.5f}")
        return "\n".join([title, fmt(head), *(fmt(row) for row in lines)]) + "\n"

    def metadata(self) -> dict:
        spec = asdict(self.spec)
        spec["trim_range"] = list(spec["trim_range"])
        return {"spec": spec, "efficiency_bound": self.bound, "wall_time": self.wall_time,
                "failures": {r.estimator: r.failures for r in self.rows}}


def _draw(law, spec: ScenarioSpec, rng):
    if isinstance(law, EmpiricalLaw):
        pooled = law.sample(spec.n0 + spec.n1, rng)
        return pooled[: spec.n0], pooled[spec.n0:] + spec.shift
    control = law.sample(spec.n0, rng)
    treated = law.sample(spec.n1, rng) + spec.shift
    return control, treated


def _replicate(spec: ScenarioSpec, law, r: int):
    rng = np.random.default_rng([spec.seed, r])
    control, treated = _draw(law, spec, rng)
    view = from_arms(control, treated)
    options = dict(trim_mode=spec.trim_mode, trim_range=spec.trim_range, eif_mode=spec.eif_mode,
                   split=spec.split, boot_m=spec.boot_m, boot_B=spec.boot_B)
    out = {}
    for name in spec.estimators:
        try:
            e, ci = estimate_with_ci(view, name, spec.ci, spec.ci_level, seed=r, **options)
        except (SemitreatError, ArithmeticError):
            out[name] = None
            continue
        out[name] = (e.tau_hat, ci.lo, ci.hi)
    return out


def run_scenario(spec: ScenarioSpec, *, workers: int | None = None) -> MonteCarloReport:
    """Run every estimator of `spec` on ``spec.reps`` seeded replications.

    Density fits are shared by the estimators within a replication.
    Replication failures are counted per estimator; more than
    ``spec.max_fail`` of them aborts the run.

    Parameters
    ----------
    spec : ScenarioSpec
    workers : int, optional
        Worker processes; defaults to the ``SEMITREAT_THREADS`` environment
        variable, else 1. Results do not depend on it: each replication has
        its own random stream and results are merged in replication order.
    """
    law = spec.make_law()
    n = spec.n0 + spec.n1
    bound = efficiency_bound(law, spec.n1 / n, n)
    if workers is None:
        workers = int(os.environ.get("SEMITREAT_THREADS", "1") or 1)
    start = time.perf_counter()
    task = partial(_replicate, spec, law)
    if workers > 1 and spec.reps > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(task, range(spec.reps), chunksize=max(1, spec.reps // (4 * workers))))
    else:
        results = [task(r) for r in range(spec.reps)]
    rows, draws = [], {}
    for name in spec.estimators:
        got = [res[name] for res in results if res[name] is not None]
        fails = spec.reps - len(got)
        if fails > spec.max_fail * spec.reps:
            raise EstimationError(f"{name} failed on {fails} of {spec.reps} replications")
        arr = np.array(got, dtype=float).reshape(-1, 3)
        rows.append(EstimatorSummary.from_draws(name, arr[:, 0], arr[:, 1], arr[:, 2], spec.shift, bound, fails))
        draws[name] = arr[:, 0]
    return MonteCarloReport(spec, rows, bound, draws, time.perf_counter() - start)


def load_scenario(path) -> ScenarioSpec:
    """Read a scenario from a JSON or TOML file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise BadParamsError(f"cannot read scenario file {path}: {exc.strerror}") from None
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise BadParamsError(f"invalid TOML in {path}: {exc}") from None
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise BadParamsError(f"invalid JSON in {path}: {exc}") from None
    if not isinstance(data, dict):
        raise BadParamsError("scenario file must contain a table/object")
    if "empirical_file" in data and data["empirical_file"]:
        ef = Path(data["empirical_file"])
        if not ef.is_absolute():
            data["empirical_file"] = str(path.parent / ef)
    if "trim_range" in data and isinstance(data["trim_range"], str):
        data["trim_range"] = tuple(float(v) for v in data["trim_range"].split(","))
    known = set(ScenarioSpec.__dataclass_fields__)
    extra = set(data) - known
    if extra:
        raise BadParamsError(f"unknown scenario keys: {', '.join(sorted(extra))}")
    try:
        return ScenarioSpec(**data)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise BadParamsError(f"invalid scenario value: {exc}") from None
