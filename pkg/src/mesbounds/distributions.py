"""Univariate loss distributions with quantile, cdf, mean, ES and LES.

All laws are immutable. Quantiles follow the left-continuous generalized
inverse ``inf{x : F(x) >= u}``; for an :class:`EmpiricalLaw` this is the
order statistic ``x_(ceil(u n))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

__all__ = [
    "DomainError",
    "InfiniteMeanError",
    "Distribution",
    "Normal",
    "Lognormal",
    "Uniform",
    "Exponential",
    "Gamma",
    "Lomax",
    "EmpiricalLaw",
    "numeric_es",
    "numeric_les",
    "make_law",
    "order_index",
]

# Numeric tail integration: Simpson on this many intervals, probabilities
# clipped to (CLIP, 1 - CLIP).
SIMPSON_INTERVALS = 10_000
CLIP = 1e-12


class DomainError(ValueError):
    """A probability level or parameter outside its admissible range."""


class InfiniteMeanError(ValueError):
    """Raised when a tail expectation is requested for an infinite-mean law."""


def _check_open_unit(u):
    arr = np.asarray(u, dtype=float)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise DomainError(f"probability must lie in (0, 1), got {u!r}")
    return arr


def _check_p(p: float) -> float:
    p = float(p)
    if not 0.0 <= p < 1.0:
        raise DomainError(f"prudence level p must lie in [0, 1), got {p!r}")
    return p


def _check_q(q: float) -> float:
    q = float(q)
    if not 0.0 < q <= 1.0:
        raise DomainError(f"left-tail level q must lie in (0, 1], got {q!r}")
    return q


def order_index(u, n: int):
    """``ceil(u * n)`` robust to representation error in ``u``.

    ``1 - (1 - 0.9)`` and similar round trips must select the same order
    statistic as ``0.9``, so the product is rounded to 9 decimals first.
    """
    return np.ceil(np.round(np.asarray(u, dtype=float) * n, 9)).astype(np.int64)


def _scalar_or_array(arr: np.ndarray, like):
    return float(arr) if np.ndim(like) == 0 else arr


def _simpson(f, a: float, b: float, intervals: int = SIMPSON_INTERVALS) -> float:
    if intervals % 2:
        intervals += 1
    t = np.linspace(a, b, intervals + 1)
    y = f(t)
    h = (b - a) / intervals
    return float(h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum()))


def numeric_es(law: "Distribution", p: float) -> float:
    """ES by integrating the quantile over (p, 1).

    Uses the substitution ``u = 1 - (1 - p) exp(-t)`` so that power-law
    singularities at ``u -> 1`` become smooth, then composite Simpson.
    """
    p = _check_p(p)
    lo = max(p, CLIP)
    tail = 1.0 - lo
    t_max = math.log(tail / CLIP)

    def integrand(t):
        w = tail * np.exp(-t)
        return law._ppf(1.0 - w) * w

    return _simpson(integrand, 0.0, t_max) / tail


def numeric_les(law: "Distribution", q: float) -> float:
    """LES by integrating the quantile over (0, q) with ``u = q exp(-t)``."""
    q = _check_q(q)
    hi = min(q, 1.0 - CLIP)
    t_max = math.log(hi / CLIP)

    def integrand(t):
        w = hi * np.exp(-t)
        return law._ppf(w) * w

    return _simpson(integrand, 0.0, t_max) / hi


class Distribution:
    """Base class. Subclasses provide ``_ppf``, ``_cdf`` and ``_mean``.

    ``_es``/``_les`` closed forms are optional; when absent the numeric
    quantile integral is used.
    """

    has_closed_form = False

    # -- public API -----------------------------------------------------
    def quantile(self, u):
        arr = _check_open_unit(u)
        return _scalar_or_array(self._ppf(arr), u)

    def cdf(self, x):
        arr = np.asarray(x, dtype=float)
        return _scalar_or_array(self._cdf(arr), x)

    def mean(self) -> float:
        return float(self._mean())

    def es(self, p: float) -> float:
        """Expected shortfall ``(1/(1-p)) * int_p^1 VaR_u du``."""
        p = _check_p(p)
        self._require_finite_mean()
        if p == 0.0:
            return self.mean()
        return float(self._es(p))

    def les(self, q: float) -> float:
        """Left expected shortfall ``(1/q) * int_0^q VaR_u du``."""
        q = _check_q(q)
        self._require_finite_mean()
        if q == 1.0:
            return self.mean()
        return float(self._les(q))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self._ppf(rng.random(n))

    # -- defaults ---------------------------------------------------------
    def _require_finite_mean(self) -> None:
        pass

    def _es(self, p: float) -> float:
        return numeric_es(self, p)

    def _les(self, q: float) -> float:
        return numeric_les(self, q)

    def _ppf(self, u):  # pragma: no cover - abstract
        raise NotImplementedError

    def _cdf(self, x):  # pragma: no cover - abstract
        raise NotImplementedError

    def _mean(self):  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True)
class Normal(Distribution):
    mu: float = 0.0
    sigma: float = 1.0
    has_closed_form = True

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("Normal requires sigma > 0")

    def _ppf(self, u):
        return self.mu + self.sigma * special.ndtri(u)

    def _cdf(self, x):
        return special.ndtr((x - self.mu) / self.sigma)

    def _mean(self):
        return self.mu

    def _es(self, p):
        z = special.ndtri(p)
        return self.mu + self.sigma * stats.norm.pdf(z) / (1.0 - p)

    def _les(self, q):
        z = special.ndtri(q)
        return self.mu - self.sigma * stats.norm.pdf(z) / q


@dataclass(frozen=True)
class Lognormal(Distribution):
    """``exp(N(mu, sigma^2))``."""

    mu: float = 0.0
    sigma: float = 1.0
    has_closed_form = True

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("Lognormal requires sigma > 0")

    def _ppf(self, u):
        return np.exp(self.mu + self.sigma * special.ndtri(u))

    def _cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            z = (np.log(np.where(x > 0, x, np.nan)) - self.mu) / self.sigma
        return np.where(x > 0, special.ndtr(np.nan_to_num(z, nan=-np.inf)), 0.0)

    def _mean(self):
        return math.exp(self.mu + 0.5 * self.sigma**2)

    def _es(self, p):
        return self._mean() * special.ndtr(self.sigma - special.ndtri(p)) / (1.0 - p)

    def _les(self, q):
        return self._mean() * special.ndtr(special.ndtri(q) - self.sigma) / q


@dataclass(frozen=True)
class Uniform(Distribution):
    a: float = 0.0
    b: float = 1.0
    has_closed_form = True

    def __post_init__(self):
        if not self.a < self.b:
            raise DomainError("Uniform requires a < b")

    def _ppf(self, u):
        return self.a + (self.b - self.a) * u

    def _cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.a) / (self.b - self.a), 0.0, 1.0)

    def _mean(self):
        return 0.5 * (self.a + self.b)

    def _es(self, p):
        return self.a + (self.b - self.a) * (1.0 + p) / 2.0

    def _les(self, q):
        return self.a + (self.b - self.a) * q / 2.0


@dataclass(frozen=True)
class Exponential(Distribution):
    rate: float = 1.0
    has_closed_form = True

    def __post_init__(self):
        if not self.rate > 0:
            raise DomainError("Exponential requires rate > 0")

    def _ppf(self, u):
        return -np.log1p(-u) / self.rate

    def _cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0)

    def _mean(self):
        return 1.0 / self.rate

    def _es(self, p):
        return (1.0 - math.log1p(-p)) / self.rate

    def _les(self, q):
        return (q + (1.0 - q) * math.log1p(-q)) / (self.rate * q)


@dataclass(frozen=True)
class Gamma(Distribution):
    shape: float = 1.0
    rate: float = 1.0
    has_closed_form = True

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise DomainError("Gamma requires shape > 0 and rate > 0")

    def _ppf(self, u):
        return special.gammaincinv(self.shape, u) / self.rate

    def _cdf(self, x):
        x = np.asarray(x, dtype=float)
        return special.gammainc(self.shape, np.maximum(x, 0.0) * self.rate)

    def _mean(self):
        return self.shape / self.rate

    # E[X; X > x] = (k / rate) * P(Gamma(k + 1) > x)
    def _es(self, p):
        x = self._ppf(p) * self.rate
        return self._mean() * special.gammaincc(self.shape + 1.0, x) / (1.0 - p)

    def _les(self, q):
        x = self._ppf(q) * self.rate
        return self._mean() * special.gammainc(self.shape + 1.0, x) / q


@dataclass(frozen=True)
class Lomax(Distribution):
    """Pareto type II: ``F(x) = 1 - (1 + x / scale) ** (-shape)``."""

    shape: float = 3.0
    scale: float = 1.0
    has_closed_form = True

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise DomainError("Lomax requires shape > 0 and scale > 0")

    def _require_finite_mean(self):
        if self.shape <= 1.0:
            raise InfiniteMeanError(f"Lomax mean undefined for shape={self.shape} <= 1")

    def mean(self) -> float:
        self._require_finite_mean()
        return super().mean()

    def _ppf(self, u):
        return self.scale * ((1.0 - u) ** (-1.0 / self.shape) - 1.0)

    def _cdf(self, x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return 1.0 - (1.0 + x / self.scale) ** (-self.shape)

    def _mean(self):
        return self.scale / (self.shape - 1.0)

    def _es(self, p):
        a, s = self.shape, self.scale
        return s * a * (1.0 - p) ** (-1.0 / a) / (a - 1.0) - s

    def _les(self, q):
        a, s = self.shape, self.scale
        k = 1.0 - 1.0 / a
        return s * ((1.0 - (1.0 - q) ** k) / k - q) / q


@dataclass(frozen=True, eq=False)
class EmpiricalLaw(Distribution):
    """Law putting mass 1/n on each observed value."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        if v.size == 0:
            raise DomainError("EmpiricalLaw needs at least one value")
        if not np.all(np.isfinite(v)):
            raise DomainError("EmpiricalLaw values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    def _ppf(self, u):
        idx = order_index(np.asarray(u), self.n) - 1
        return self.values[np.clip(idx, 0, self.n - 1)]

    def _cdf(self, x):
        return np.searchsorted(self.values, x, side="right") / self.n

    def _mean(self):
        return self.values.mean()

    def _es(self, p):
        k = int(order_index(p, self.n))
        if k == 0:
            return self._mean()
        var = self.values[k - 1]
        tail = self.values[self.values > var]
        if tail.size == 0:
            tail = self.values[self.values >= var]
        return tail.mean()

    def _les(self, q):
        # exact mirror of the strict upper tail: les(X, q) = -es(-X, 1 - q)
        return -EmpiricalLaw(-self.values)._es(1.0 - q)


_FAMILIES = {
    "normal": Normal,
    "lognormal": Lognormal,
    "uniform": Uniform,
    "exponential": Exponential,
    "expo": Exponential,
    "gamma": Gamma,
    "lomax": Lomax,
}


def make_law(family: str, *params: float) -> Distribution:
    """Build a parametric law from a family name and positional parameters.

    >>> make_law("normal", 0, 1)
    Normal(mu=0.0, sigma=1.0)
    """
    try:
        cls = _FAMILIES[family.strip().lower()]
    except KeyError:
        raise DomainError(f"unknown distribution family {family!r}") from None
    return cls(*(float(v) for v in params))
