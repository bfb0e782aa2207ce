"""Population outcome laws with closed-form density, cdf and quantile.

These serve as simulation designs and as oracles: each law knows its
Fisher information for location and its efficient quantile weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .exceptions import BadLawError, BadParamsError

__all__ = [
    "Law",
    "Normal",
    "Laplace",
    "Cauchy",
    "ExtendedHuber",
    "EmpiricalLaw",
    "get_law",
]

_SQRT2PI = math.sqrt(2 * math.pi)


class Law:
    """Interface shared by the closed-form laws (standardized location 0)."""

    name = "law"
    information: float

    def pdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def ppf(self, u):
        raise NotImplementedError

    def score(self, x):
        """First derivative of the log density."""
        raise NotImplementedError

    def score_d1(self, x):
        """Second derivative of the log density."""
        raise NotImplementedError

    def sample(self, n: int, rng) -> np.ndarray:
        return self.ppf(rng.random(n))

    def efficient_weight(self, u):
        """Efficient quantile weight ``-(log f)''(F^-1(u)) / I``."""
        return -self.score_d1(self.ppf(u)) / self.information

    @property
    def weight_atoms(self) -> tuple[tuple[float, float], ...]:
        """Point masses of the efficient weight measure, as ``(u, mass)``."""
        return ()


class Normal(Law):
    name = "normal"
    information = 1.0

    def pdf(self, x):
        return stats.norm.pdf(x)

    def cdf(self, x):
        return special.ndtr(x)

    def ppf(self, u):
        return special.ndtri(u)

    def score(self, x):
        return -np.asarray(x, dtype=float)

    def score_d1(self, x):
        return np.full(np.shape(x), -1.0)

    def sample(self, n, rng):
        return rng.standard_normal(n)


class Laplace(Law):
    """Double exponential with unit scale; ``I = 1``."""

    name = "laplace"
    information = 1.0

    def pdf(self, x):
        return 0.5 * np.exp(-np.abs(x))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, 0.5 * np.exp(np.minimum(x, 0)), 1 - 0.5 * np.exp(-np.maximum(x, 0)))

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        return np.where(u < 0.5, np.log(2 * np.minimum(u, 0.5)), -np.log(2 * (1 - np.maximum(u, 0.5))))

    def score(self, x):
        return -np.sign(x)

    def score_d1(self, x):
        # the efficient weight is a point mass at the median, not a density
        return np.zeros(np.shape(x))

    def efficient_weight(self, u):
        return np.zeros(np.shape(u))

    @property
    def weight_atoms(self):
        return ((0.5, 1.0),)

    def sample(self, n, rng):
        return rng.laplace(0.0, 1.0, n)


class Cauchy(Law):
    """Standard Cauchy; ``I = 1/2``. Sampled by inverse cdf."""

    name = "cauchy"
    information = 0.5

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return 1 / (np.pi * (1 + x * x))

    def cdf(self, x):
        return 0.5 + np.arctan(x) / np.pi

    def ppf(self, u):
        return np.tan(np.pi * (np.asarray(u, dtype=float) - 0.5))

    def score(self, x):
        x = np.asarray(x, dtype=float)
        return -2 * x / (1 + x * x)

    def score_d1(self, x):
        x = np.asarray(x, dtype=float)
        return -2 * (1 - x * x) / (1 + x * x) ** 2

    def efficient_weight(self, u):
        # closed form in u; avoids evaluating tan near u = 0, 1
        u = np.asarray(u, dtype=float)
        return 2 * (-np.cos(2 * np.pi * u) * np.sin(np.pi * u) ** 2) / self.information


@dataclass(frozen=True)
class ExtendedHuber(Law):
    """Gaussian centre with exponential tails, glued with matching slopes.

    The standardized log density is ``-x**2/2 - c`` on ``[-k1, k2]``,
    ``k1*x + k1**2/2 - c`` below ``-k1`` and ``-k2*x + k2**2/2 - c`` above
    ``k2``. Location and scale enter as ``(x - mu) / sigma``.

    The family is symmetric iff ``k1 == k2`` and tends to the normal law as
    both grow. The Fisher information of the standardized law is the mass of
    the Gaussian centre, ``1 - F(-k1) - (1 - F(k2))``.
    """

    k1: float
    k2: float
    mu: float = 0.0
    sigma: float = 1.0
    name: str = field(default="huber", init=False)

    def __post_init__(self):
        for label, v in (("k1", self.k1), ("k2", self.k2), ("sigma", self.sigma)):
            if not (np.isfinite(v) and v > 0):
                raise BadParamsError(f"{label} must be a positive finite number, got {v!r}")
        if not np.isfinite(self.mu):
            raise BadParamsError(f"mu must be finite, got {self.mu!r}")

    @property
    def left_tail(self) -> float:
        return math.exp(-self.k1**2 / 2) / self.k1

    @property
    def right_tail(self) -> float:
        return math.exp(-self.k2**2 / 2) / self.k2

    @property
    def middle(self) -> float:
        return _SQRT2PI * (special.ndtr(self.k2) - special.ndtr(-self.k1))

    @property
    def c(self) -> float:
        """Log normalizing constant of the standardized density."""
        return math.log(self.left_tail + self.right_tail + self.middle)

    @property
    def alpha(self) -> float:
        """Mass of the left exponential tail, ``F(-k1)``."""
        return self.left_tail * math.exp(-self.c)

    @property
    def beta(self) -> float:
        """Mass of the right exponential tail, ``1 - F(k2)``."""
        return self.right_tail * math.exp(-self.c)

    @property
    def information(self) -> float:
        return (1 - self.alpha - self.beta) / self.sigma**2

    def _z(self, x):
        return (np.asarray(x, dtype=float) - self.mu) / self.sigma

    def logpdf(self, x):
        z = self._z(x)
        k1, k2 = self.k1, self.k2
        out = np.where(
            z < -k1,
            k1 * z + k1**2 / 2,
            np.where(z > k2, -k2 * z + k2**2 / 2, -z * z / 2),
        )
        return out - self.c - math.log(self.sigma)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def cdf(self, x):
        z = self._z(x)
        k1, k2, ec = self.k1, self.k2, math.exp(-self.c)
        left = np.exp(k1 * np.minimum(z, -k1) + k1**2 / 2) / k1 * ec
        mid = (self.left_tail + _SQRT2PI * (special.ndtr(np.clip(z, -k1, k2)) - special.ndtr(-k1))) * ec
        right = 1 - np.exp(-k2 * np.maximum(z, k2) + k2**2 / 2) / k2 * ec
        return np.where(z < -k1, left, np.where(z > k2, right, mid))

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        k1, k2, c = self.k1, self.k2, self.c
        a, b = self.alpha, self.beta
        with np.errstate(divide="ignore", invalid="ignore"):
            left = (np.log(np.maximum(u, 1e-300) * k1) + c - k1**2 / 2) / k1
            right = -(np.log(np.maximum(1 - u, 1e-300) * k2) + c - k2**2 / 2) / k2
            target = special.ndtr(-k1) + (u * math.exp(c) - self.left_tail) / _SQRT2PI
            mid = special.ndtri(np.clip(target, 0.0, 1.0))
        z = np.where(u < a, left, np.where(u > 1 - b, right, np.clip(mid, -k1, k2)))
        z = np.where(u <= 0, -np.inf, np.where(u >= 1, np.inf, z))
        return self.mu + self.sigma * z

    def score(self, x):
        z = self._z(x)
        return np.clip(-z, -self.k2, self.k1) / self.sigma

    def score_d1(self, x):
        z = self._z(x)
        return np.where((z >= -self.k1) & (z <= self.k2), -1.0, 0.0) / self.sigma**2

    def efficient_weight(self, u):
        u = np.asarray(u, dtype=float)
        inside = (u >= self.alpha) & (u <= 1 - self.beta)
        return np.where(inside, 1 / (1 - self.alpha - self.beta), 0.0)


class EmpiricalLaw:
    """Finite population read from data; replicates sample without replacement."""

    name = "empirical"

    def __init__(self, values):
        v = np.asarray(values, dtype=float).ravel()
        if v.size == 0 or not np.all(np.isfinite(v)):
            raise BadLawError("empirical population must be non-empty and finite")
        self.values = np.sort(v)

    def sample(self, n: int, rng) -> np.ndarray:
        if n > self.values.size:
            raise BadLawError(f"cannot draw {n} units without replacement from {self.values.size}")
        return rng.choice(self.values, size=n, replace=False)

    @property
    def information(self) -> float:
        from .density import fit_adaptive_density

        return fit_adaptive_density(self.values).information()


def get_law(name: str, **params) -> Law | EmpiricalLaw:
    """Look up a law by name (``normal``, ``laplace``, ``cauchy``, ``huber``, ``empirical``)."""
    key = str(name).lower()
    if key == "normal":
        return Normal()
    if key in ("laplace", "double-exponential", "double_exponential"):
        return Laplace()
    if key == "cauchy":
        return Cauchy()
    if key in ("huber", "extended-huber", "extended_huber"):
        try:
            return ExtendedHuber(float(params["k1"]), float(params["k2"]))
        except KeyError as exc:
            raise BadLawError("huber law needs k1 and k2") from exc
    if key == "empirical":
        if "values" in params:
            return EmpiricalLaw(params["values"])
        path = params.get("path") or params.get("empirical_file")
        if path is None:
            raise BadLawError("empirical law needs a data file")
        return EmpiricalLaw(_read_values(path))
    raise BadLawError(f"unknown law {name!r}")


def _read_values(path) -> np.ndarray:
    import csv

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        col = header.index("y") if "y" in header else 0
        return np.array([float(row[col]) for row in reader if row])
