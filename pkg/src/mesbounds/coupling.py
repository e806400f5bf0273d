"""Deterministic couplings of given marginals and rank diagnostics.

Every coupling is driven by the midpoint grid ``u_k = (k - 0.5) / n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .distributions import Distribution

__all__ = [
    "Comonotone",
    "AntimonotoneAt",
    "Mix3Uniform",
    "Independent",
    "CoupledSample",
    "midpoint_grid",
    "couple",
    "mix_uniform3",
    "antimonotone_diagnostic",
    "certify_coupling",
]


@dataclass(frozen=True)
class Comonotone:
    pass


@dataclass(frozen=True)
class AntimonotoneAt:
    """Column ``j`` (0-based) driven by ``1 - u``, all others by ``u``."""

    j: int


@dataclass(frozen=True)
class Mix3Uniform:
    pass


@dataclass(frozen=True)
class Independent:
    seed: int


CouplingKind = Comonotone | AntimonotoneAt | Mix3Uniform | Independent


@dataclass(frozen=True, eq=False)
class CoupledSample:
    values: np.ndarray = field(repr=False)  # shape (n, d)
    grid: np.ndarray = field(repr=False)  # shape (n,)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def sums(self) -> np.ndarray:
        return self.values.sum(axis=1)

    def column(self, j: int) -> np.ndarray:
        return self.values[:, j]


def midpoint_grid(n: int) -> np.ndarray:
    """``(k - 0.5) / n`` for ``k = 1..n``."""
    return (np.arange(n, dtype=float) + 0.5) / n


def reversed_grid(n: int) -> np.ndarray:
    """``1 - u_k`` evaluated without cancellation error."""
    return midpoint_grid(n)[::-1].copy()


def couple(marginals: Sequence[Distribution], kind: CouplingKind, n: int) -> CoupledSample:
    """Realize ``n`` rows of the requested coupling of ``marginals``."""
    marginals = list(marginals)
    d = len(marginals)
    if d == 0:
        raise ValueError("couple needs at least one marginal")
    if n < 2:
        raise ValueError("couple needs n >= 2")
    u = midpoint_grid(n)
    if isinstance(kind, Mix3Uniform):
        return mix_uniform3(n)
    cols = []
    if isinstance(kind, Comonotone):
        cols = [law.quantile(u) for law in marginals]
    elif isinstance(kind, AntimonotoneAt):
        if not 0 <= kind.j < d:
            raise ValueError(f"antimonotone index {kind.j} outside 0..{d - 1}")
        u_rev = reversed_grid(n)
        cols = [law.quantile(u_rev if i == kind.j else u) for i, law in enumerate(marginals)]
    elif isinstance(kind, Independent):
        rng = np.random.default_rng(kind.seed)
        cols = [law.quantile(rng.permutation(u)) for law in marginals]
    else:
        raise TypeError(f"unknown coupling kind {kind!r}")
    return CoupledSample(np.column_stack(cols), u)


def mix_uniform3(n: int) -> CoupledSample:
    """Three Unif[0,1] columns whose row sums are identically 3/2."""
    if n < 2:
        raise ValueError("mix_uniform3 needs n >= 2")
    u = midpoint_grid(n)
    low = u <= 0.5
    y2 = np.where(low, -2.0 * u + 1.0, -2.0 * u + 2.0)
    y3 = np.where(low, u + 0.5, u - 0.5)
    return CoupledSample(np.column_stack([u, y2, y3]), u)


def antimonotone_diagnostic(x, s) -> float:
    """Spearman rank correlation (mid-ranks for ties).

    -1 certifies that the sample pair is antimonotone.
    """
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    if x.shape != s.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {s.shape}")
    if x.size < 2:
        raise ValueError("need at least two observations")
    rx = stats.rankdata(x)
    rs = stats.rankdata(s)
    rx -= rx.mean()
    rs -= rs.mean()
    denom = np.sqrt((rx * rx).sum() * (rs * rs).sum())
    if denom == 0.0:
        return float("nan")
    return float((rx * rs).sum() / denom)


def certify_coupling(values, center: float | None = None, atol: float = 1e-12) -> dict:
    """Check a user-supplied coupling matrix for joint mixability.

    Returns the observed centre and whether every row sum equals it.
    """
    values = np.asarray(values, dtype=float)
    sums = values.sum(axis=1)
    c = float(np.mean(sums)) if center is None else float(center)
    return {"center": c, "mixable": bool(np.all(np.abs(sums - c) <= atol))}
