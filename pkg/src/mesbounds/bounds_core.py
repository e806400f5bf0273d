"""Unconstrained MES bounds, sample MES estimators and the spread measure."""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .distributions import Distribution, _check_p, order_index

__all__ = [
    "TailConvention",
    "MCEstimate",
    "BoundsReport",
    "BoundChainError",
    "unconstrained_upper",
    "unconstrained_lower",
    "tail_mask",
    "mes_from_samples",
    "mes_estimate",
    "mes_mc",
    "tail_ecdf",
    "spread_delta",
    "check_chain",
]


class TailConvention(enum.Enum):
    """How the tail event ``{S > VaR_p(S)}`` is formed on a sample.

    ``STRICT_WITH_FALLBACK`` uses the strict tail and switches to
    ``{S >= VaR}`` only when the strict tail is empty; ``WEAK`` always uses
    the weak tail.
    """

    STRICT_WITH_FALLBACK = "strict"
    WEAK = "weak"


class BoundChainError(ValueError):
    """A set of bounds violates ``m <= mf <= mes <= Mf <= M``."""


@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float
    n_tail: int

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class BoundsReport:
    p: float
    m: float
    M: float
    mf: float | None = None
    Mf: float | None = None
    mes: float | None = None
    delta: float | None = None
    srci: float | None = None
    srci_f: float | None = None
    stderr: dict = field(default_factory=dict, compare=False)

    def with_(self, **kw) -> "BoundsReport":
        return replace(self, **kw)


def unconstrained_upper(law_j: Distribution, p: float) -> float:
    """Worst-case MES over all couplings: ``ES_p(X_j)``."""
    return law_j.es(p)


def unconstrained_lower(law_j: Distribution, p: float) -> float:
    """Lower bound ``LES_{1-p}(X_j)``; not sharp in general."""
    p = _check_p(p)
    return law_j.les(1.0 - p)


def tail_mask(s, p: float, convention: TailConvention = TailConvention.STRICT_WITH_FALLBACK) -> np.ndarray:
    """Boolean mask of the sample tail event of ``s`` at level ``p``.

    VaR is the order statistic ``s_(ceil(p n))``; ``p = 0`` selects every row.
    """
    s = np.asarray(s, dtype=float)
    p = _check_p(p)
    k = int(order_index(p, s.size))
    if k == 0:
        return np.ones(s.size, dtype=bool)
    var = np.partition(s, k - 1)[k - 1]
    if convention is TailConvention.WEAK:
        return s >= var
    mask = s > var
    if not mask.any():
        mask = s >= var
    return mask


def mes_estimate(xj, s, p: float, convention: TailConvention = TailConvention.STRICT_WITH_FALLBACK) -> MCEstimate:
    """Sample MES with the tail standard error ``sd / sqrt(tail size)``."""
    xj = np.asarray(xj, dtype=float)
    s = np.asarray(s, dtype=float)
    if xj.shape != s.shape:
        raise ValueError(f"length mismatch: {xj.shape} vs {s.shape}")
    if xj.size < 2:
        raise ValueError("need at least two observations")
    tail = xj[tail_mask(s, p, convention)]
    se = float(tail.std(ddof=1) / math.sqrt(tail.size)) if tail.size > 1 else 0.0
    return MCEstimate(float(tail.mean()), se, int(tail.size))


def mes_from_samples(xj, s, p: float, convention: TailConvention = TailConvention.STRICT_WITH_FALLBACK) -> float:
    """``mean(xj | s > VaR_p(s))`` on paired samples."""
    return mes_estimate(xj, s, p, convention).value


def tail_ecdf(xj, s, p: float, t, convention: TailConvention = TailConvention.STRICT_WITH_FALLBACK) -> np.ndarray:
    """``P(X_j <= t | S > VaR_p(S))`` on a sample, evaluated at each ``t``."""
    xj = np.asarray(xj, dtype=float)
    tail = np.sort(xj[tail_mask(s, p, convention)])
    return np.searchsorted(tail, np.asarray(t, dtype=float), side="right") / tail.size


Sampler = Callable[[np.random.Generator, int], tuple[np.ndarray, np.ndarray]]

MC_CHUNK = 1 << 16


def mes_mc(
    sampler: Sampler,
    p: float,
    n: int,
    seed: int,
    *,
    workers: int = 1,
    chunk: int = MC_CHUNK,
) -> MCEstimate:
    """Monte Carlo MES from a joint sampler of ``(X_j, S)``.

    Chunk ``c`` is drawn from ``default_rng([seed, c])`` so the estimate is
    bit-identical for any ``workers``.
    """
    if n < 1000:
        raise ValueError("mes_mc needs n >= 1000")
    sizes = [min(chunk, n - start) for start in range(0, n, chunk)]

    def draw(c: int):
        return sampler(np.random.default_rng([seed, c]), sizes[c])

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(draw, range(len(sizes))))
    else:
        parts = [draw(c) for c in range(len(sizes))]
    xj = np.concatenate([a for a, _ in parts])
    s = np.concatenate([b for _, b in parts])
    return mes_estimate(xj, s, p)


def spread_delta(m: float, M: float, mf: float, Mf: float, *, strict: bool = True) -> float:
    """``1 - (Mf - mf) / (M - m)``, with 1 when ``M == m``.

    Not clamped: MC estimates may give slightly negative values. With
    ``strict=False`` inverted Monte Carlo bounds are passed through.
    """
    if strict and M < m:
        raise BoundChainError(f"inverted unconstrained bounds: m={m} > M={M}")
    if strict and Mf < mf:
        raise BoundChainError(f"inverted constrained bounds: mf={mf} > Mf={Mf}")
    if M == m:
        return 1.0
    return 1.0 - (Mf - mf) / (M - m)


def check_chain(*values: float | None, tol: float = 0.0, labels=None) -> None:
    """Raise :class:`BoundChainError` unless ``values`` are nondecreasing.

    ``None`` entries are skipped; each adjacent pair may be out of order by
    at most ``tol``.
    """
    labels = labels or [f"v{i}" for i in range(len(values))]
    pairs = [(lab, v) for lab, v in zip(labels, values) if v is not None]
    for (la, a), (lb, b) in zip(pairs, pairs[1:]):
        if a > b + tol:
            raise BoundChainError(f"bound chain violated: {la}={a:.6g} > {lb}={b:.6g}")
