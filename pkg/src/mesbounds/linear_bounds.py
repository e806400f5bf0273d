"""MES bounds when each risk has a linear conditional mean given the aggregate.

If ``E[X_j | S] = alpha + beta S`` then every allocation with a nondecreasing
tail weight reduces to ``mu_j + beta (pi(S) - E S)``; for MES the weight is
the tail indicator and ``pi(S) = ES_p(S)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .bounds_core import mes_from_samples, spread_delta, TailConvention
from .coupling import Comonotone, couple, mix_uniform3
from .distributions import Distribution, DomainError, Uniform, _check_p

__all__ = [
    "LinearCondSpec",
    "BivariateNormalSpec",
    "wipm_mes",
    "bivariate_normal_mes",
    "bivariate_normal_bounds",
    "nonnegative_bounds",
    "uniform3_verify",
    "Uniform3Row",
]


@dataclass(frozen=True)
class LinearCondSpec:
    alpha: float
    beta: float


@dataclass(frozen=True)
class BivariateNormalSpec:
    muX: float
    muS: float
    sigmaX: float
    sigmaS: float
    rho: float = 0.0

    def __post_init__(self):
        if self.sigmaX <= 0 or self.sigmaS <= 0:
            raise DomainError("standard deviations must be positive")
        if not -1.0 <= self.rho <= 1.0:
            raise DomainError(f"correlation {self.rho} outside [-1, 1]")


def wipm_mes(mu_j: float, beta: float, es_S: float, mean_S: float) -> float:
    return mu_j + beta * (es_S - mean_S)


def _normal_es(mu: float, sigma: float, p: float) -> float:
    p = _check_p(p)
    if p == 0.0:
        return mu
    return mu + sigma * stats.norm.pdf(stats.norm.ppf(p)) / (1.0 - p)


def bivariate_normal_mes(spec: BivariateNormalSpec, p: float) -> float:
    """``mu_X + rho (sigma_X / sigma_S) (ES_p(S) - mu_S)``."""
    es_s = _normal_es(spec.muS, spec.sigmaS, p)
    return wipm_mes(spec.muX, spec.rho * spec.sigmaX / spec.sigmaS, es_s, spec.muS)


def bivariate_normal_bounds(spec: BivariateNormalSpec, p: float) -> tuple[float, float]:
    """MES at ``rho = -1`` and ``rho = +1``; ``spec.rho`` is ignored."""
    half = spec.sigmaX / spec.sigmaS * (_normal_es(spec.muS, spec.sigmaS, p) - spec.muS)
    return spec.muX - half, spec.muX + half


def _support_sign(law: Distribution) -> int:
    lo, hi = law.quantile(1e-12), law.quantile(1.0 - 1e-12)
    if lo >= 0.0:
        return 1
    if hi <= 0.0:
        return -1
    return 0


def nonnegative_bounds(laws: Sequence[Distribution], j: int, p: float) -> tuple[float, float]:
    """``(mu_j, r_j * sum_i ES_p(X_i))`` with ``r_j = mu_j / sum_i mu_i``.

    Valid for risks that are all non-negative or all non-positive. The lower
    end is attained only when the risks are jointly mixable.
    """
    laws = list(laws)
    if not 0 <= j < len(laws):
        raise IndexError(f"target index {j} outside 0..{len(laws) - 1}")
    signs = {_support_sign(law) for law in laws}
    if 0 in signs or len(signs) > 1:
        raise DomainError("risks must share one sign of support")
    means = np.array([law.mean() for law in laws])
    total = means.sum()
    if total == 0.0:
        raise DomainError("total mean is zero")
    r = means[j] / total
    es_sum = math.fsum(law.es(p) for law in laws)
    return float(means[j]), float(r * es_sum)


@dataclass(frozen=True)
class Uniform3Row:
    p: float
    m: float
    M: float
    ml: float
    Ml: float
    delta: float
    mes_mixing: float
    mes_comonotone: float


def uniform3_verify(n: int, p_values: Sequence[float] = (0.55, 0.65, 0.75, 0.85, 0.95)) -> list[Uniform3Row]:
    """Reproduce the three-uniform table and check attainment on samples.

    The mixing coupling has a constant sum, so its tail is empty under the
    strict convention and the weak fallback returns the plain mean 1/2.
    """
    if n < 1000:
        raise ValueError("uniform3_verify needs n >= 1000")
    law = Uniform(0.0, 1.0)
    mix = mix_uniform3(n)
    como = couple([law] * 3, Comonotone(), n)
    rows = []
    for p in p_values:
        M = law.es(p)
        m = law.les(1.0 - p)
        ml, Ml = nonnegative_bounds([law] * 3, 0, p)
        rows.append(
            Uniform3Row(
                p=p, m=m, M=M, ml=ml, Ml=Ml,
                delta=spread_delta(m, M, ml, Ml),
                mes_mixing=mes_from_samples(mix.column(0), mix.sums, p, TailConvention.STRICT_WITH_FALLBACK),
                mes_comonotone=mes_from_samples(como.column(0), como.sums, p),
            )
        )
    return rows
