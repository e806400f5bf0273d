"""Loss/factor panels, five-factor regression and empirical MES bounds.

The regression is ``X_i - X_f = mu_i + b_i' Y + Z_i`` where ``X_f`` is the
risk-free loss and ``Y`` holds the five factors. Constrained bounds come from
a synthetic panel that keeps each observed common part and couples the
residual quantiles across assets.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from .bounds_core import BoundsReport, check_chain, mes_estimate, spread_delta
from .coupling import midpoint_grid
from .distributions import EmpiricalLaw, _check_p

__all__ = [
    "DataError",
    "DataWarning",
    "LossPanel",
    "FactorPanel",
    "RegressionFit",
    "SrciReport",
    "FACTOR_COLUMNS",
    "load_loss_csv",
    "load_factor_csv",
    "align",
    "ffm_fit",
    "empirical_bounds",
    "srci",
    "synth_panel",
    "write_loss_csv",
    "write_factor_csv",
    "write_bounds_csv",
    "validate_reports",
    "OUTPUT_COLUMNS",
]

log = logging.getLogger(__name__)

FACTOR_COLUMNS = ("MKT_RF", "SMB", "HML", "RMW", "CMA")
OUTPUT_COLUMNS = ("p", "m", "M", "mf", "Mf", "mes", "delta", "srci", "srci_f")


class DataError(ValueError):
    """Malformed or insufficient input data."""


class DataWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class LossPanel:
    dates: np.ndarray  # datetime64[D]
    tickers: tuple
    losses: np.ndarray  # (n, d)

    @property
    def n(self) -> int:
        return self.losses.shape[0]

    @property
    def d(self) -> int:
        return self.losses.shape[1]

    def column(self, ticker: str) -> np.ndarray:
        return self.losses[:, self.index(ticker)]

    def index(self, ticker: str) -> int:
        try:
            return self.tickers.index(ticker)
        except ValueError:
            raise KeyError(f"target {ticker!r} not among tickers {list(self.tickers)}") from None


@dataclass(frozen=True, eq=False)
class FactorPanel:
    dates: np.ndarray
    factors: np.ndarray  # (n, 5)
    rf: np.ndarray  # risk-free *loss*, i.e. minus the published rate

    @property
    def n(self) -> int:
        return self.factors.shape[0]


@dataclass(frozen=True, eq=False)
class RegressionFit:
    tickers: tuple
    coef: np.ndarray  # (d, 6): intercept then five exposures
    stderr: np.ndarray  # (d, 6), classical OLS standard errors
    residuals: np.ndarray  # (n, d)

    @property
    def mu(self) -> np.ndarray:
        return self.coef[:, 0]

    @property
    def b(self) -> np.ndarray:
        return self.coef[:, 1:]


# ---------------------------------------------------------------------------
# loading


def _read_table(path, required: Sequence[str] | None = None) -> tuple[pd.DataFrame, list[str]]:
    try:
        with open(path, newline="") as fh:
            header = next(csv.reader(fh), [])
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise DataError(f"{path}: empty file") from None
    except (pd.errors.ParserError, UnicodeDecodeError, csv.Error) as exc:
        raise DataError(f"{path}: unparseable CSV ({exc})") from None
    cols = [c.strip() for c in raw.columns]
    if not cols or cols[0].lower() != "date":
        raise DataError(f"{path}: header must start with 'date', got {cols[:1]}")
    if len(cols) < 2:
        raise DataError(f"{path}: header names no data columns")
    if any(c.startswith("Unnamed:") or c == "" for c in cols):
        raise DataError(f"{path}: header has an empty column name")
    header = [h.strip() for h in header]
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names in header")
    if required is not None:
        missing = [c for c in required if c not in cols]
        if missing:
            raise DataError(f"{path}: missing required column(s) {', '.join(missing)}")
    raw.columns = cols

    dates = pd.to_datetime(raw["date"], format="ISO8601", errors="coerce")
    data_cols = [c for c in cols[1:] if required is None or c in required]
    values = raw[data_cols].apply(lambda s: pd.to_numeric(s, errors="coerce"))
    bad = dates.isna() | values.isna().any(axis=1) | ~np.isfinite(values.to_numpy(dtype=float)).all(axis=1)
    if bad.any():
        count = int(bad.sum())
        warnings.warn(f"{path}: dropped {count} row(s) with missing or non-numeric cells", DataWarning, stacklevel=3)
    frame = values.loc[~bad].copy()
    frame.index = dates.loc[~bad].dt.normalize()
    dup = frame.index[frame.index.duplicated()]
    if len(dup):
        raise DataError(f"{path}: duplicate date {dup[0].date().isoformat()}")
    if len(frame) < 2:
        raise DataError(f"{path}: fewer than 2 usable rows")
    return frame.sort_index(), data_cols


def load_loss_csv(path) -> LossPanel:
    """Read ``date,<ticker>,...`` with decimal losses."""
    frame, tickers = _read_table(path)
    return LossPanel(
        frame.index.to_numpy().astype("datetime64[D]"),
        tuple(tickers),
        frame.to_numpy(dtype=float),
    )


def load_factor_csv(path, percent: bool = False) -> FactorPanel:
    """Read ``date,MKT_RF,SMB,HML,RMW,CMA,RF``; percents are divided by 100."""
    frame, _ = _read_table(path, required=FACTOR_COLUMNS + ("RF",))
    scale = 0.01 if percent else 1.0
    return FactorPanel(
        frame.index.to_numpy().astype("datetime64[D]"),
        frame[list(FACTOR_COLUMNS)].to_numpy(dtype=float) * scale,
        -frame["RF"].to_numpy(dtype=float) * scale,
    )


def align(losses: LossPanel, factors: FactorPanel) -> tuple[LossPanel, FactorPanel]:
    """Inner join on dates; dropped dates are reported as a warning."""
    common, il, jf = np.intersect1d(losses.dates, factors.dates, assume_unique=True, return_indices=True)
    dropped = losses.n + factors.n - 2 * common.size
    if dropped:
        warnings.warn(f"alignment dropped {dropped} unmatched date row(s)", DataWarning, stacklevel=2)
    if common.size < 2:
        raise DataError("loss and factor panels share fewer than 2 dates")
    return (
        LossPanel(common, losses.tickers, losses.losses[il]),
        FactorPanel(common, factors.factors[jf], factors.rf[jf]),
    )


# ---------------------------------------------------------------------------
# regression


def ffm_fit(losses: LossPanel, factors: FactorPanel, *, rcond: float = 1e-10) -> RegressionFit:
    """OLS of ``X_i - X_f`` on ``[1, Y]`` for every asset at once."""
    if losses.n != factors.n or not np.array_equal(losses.dates, factors.dates):
        raise DataError("panels are not aligned; call align() first")
    n, d = losses.losses.shape
    design = np.column_stack([np.ones(n), factors.factors])
    k = design.shape[1]
    if n < d + 7 or n <= k:
        raise DataError(f"need at least {max(d + 7, k + 1)} rows for the regression, got {n}")
    sv = np.linalg.svd(design, compute_uv=False)
    if sv[-1] <= rcond * sv[0]:
        raise DataError("factor design matrix is rank-deficient (constant or collinear factor column)")
    response = losses.losses - factors.rf[:, None]
    coef, *_ = np.linalg.lstsq(design, response, rcond=None)
    resid = response - design @ coef
    # (A'A)^{-1} through the triangular factor of A
    r = np.linalg.qr(design, mode="r")
    r_inv = np.linalg.solve(r, np.eye(k))
    xtx_diag = (r_inv * r_inv).sum(axis=1)
    sigma2 = (resid * resid).sum(axis=0) / (n - k)
    stderr = np.sqrt(np.outer(sigma2, xtx_diag))
    return RegressionFit(losses.tickers, coef.T.copy(), stderr, resid)


# ---------------------------------------------------------------------------
# bounds


def _synthetic(common: np.ndarray, residuals: np.ndarray, j: int, n_syn: int, seed: int):
    """Upper (comonotone) and lower-candidate synthetic panels."""
    n, d = common.shape
    rng = np.random.default_rng([seed, 0])
    perm = rng.permutation(n_syn)
    grid = midpoint_grid(n_syn)
    u = grid[perm]
    u_rev = grid[::-1][perm]  # equals 1 - u without rounding
    base = common[np.arange(n_syn) % n]
    upper = base.copy()
    lower = base.copy()
    for i in range(d):
        law = EmpiricalLaw(residuals[:, i])
        qu = law.quantile(u)
        upper[:, i] += qu
        lower[:, i] += qu if i == j else law.quantile(u_rev)
    return upper, lower


def empirical_bounds(
    losses: LossPanel,
    factors: FactorPanel,
    fit: RegressionFit,
    target: str | int,
    p_grid: Iterable[float],
    n_syn: int | None = None,
    seed: int = 0,
) -> list[BoundsReport]:
    """Unconstrained, factor-constrained and observed MES for one asset.

    ``m``, ``M`` and ``mes`` use the observed sample. ``mf`` and ``Mf`` use
    ``n_syn`` synthetic rows (default ``10 n``) whose dates cycle through the
    panel and whose residual uniforms are a seeded permutation of the
    midpoint grid. At ``p = 0`` every quantity is the sample mean.
    """
    j = losses.index(target) if isinstance(target, str) else int(target)
    if not 0 <= j < losses.d:
        raise KeyError(f"target index {j} outside 0..{losses.d - 1}")
    n = losses.n
    n_syn = 10 * n if n_syn is None else int(n_syn)
    if n_syn < n:
        raise ValueError(f"n_syn must be at least the panel length {n}")
    common = factors.rf[:, None] + fit.mu + factors.factors @ fit.b.T
    upper, lower = _synthetic(common, fit.residuals, j, n_syn, seed)
    s_up, s_lo = upper.sum(axis=1), lower.sum(axis=1)
    xj = losses.losses[:, j]
    s = losses.losses.sum(axis=1)
    law = EmpiricalLaw(xj)
    mean = float(xj.mean())

    reports = []
    for p in p_grid:
        p = _check_p(p)
        if p == 0.0:
            reports.append(_finish(BoundsReport(p, mean, mean, mean, mean, mean)))
            continue
        up = mes_estimate(upper[:, j], s_up, p)
        lo = mes_estimate(lower[:, j], s_lo, p)
        obs = mes_estimate(xj, s, p)
        rep = BoundsReport(
            p, law.les(1.0 - p), law.es(p), lo.value, up.value, obs.value,
            stderr={"mf": lo.stderr, "Mf": up.stderr, "mes": obs.stderr},
        )
        reports.append(_finish(rep))
    return reports


def _finish(rep: BoundsReport) -> BoundsReport:
    delta = spread_delta(rep.m, rep.M, rep.mf, rep.Mf, strict=False)
    out = srci(rep)
    return rep.with_(delta=delta, srci=out.beta, srci_f=out.beta_f)


@dataclass(frozen=True)
class SrciReport:
    beta: float
    beta_f: float
    beta_note: str = ""
    beta_f_note: str = ""
    report: BoundsReport | None = field(default=None, compare=False, repr=False)

    @property
    def flagged(self) -> bool:
        """True when a defined index falls outside [0, 1] (estimation noise)."""
        return any(not math.isnan(v) and not 0.0 <= v <= 1.0 for v in (self.beta, self.beta_f))


def _criticality(lo, hi, mes) -> tuple[float, str]:
    if lo is None or hi is None or mes is None:
        return math.nan, "missing input"
    if not hi > lo:
        return math.nan, "degenerate bounds (upper <= lower)"
    beta = 1.0 - (hi - mes) / (hi - lo)
    return beta, "" if 0.0 <= beta <= 1.0 else "outside [0, 1]"


def srci(report: BoundsReport) -> SrciReport:
    """Raw criticality indices ``1 - (M - mes) / (M - m)`` and the constrained analogue."""
    beta, note = _criticality(report.m, report.M, report.mes)
    beta_f, note_f = _criticality(report.mf, report.Mf, report.mes)
    return SrciReport(beta, beta_f, note, note_f, report)


def validate_reports(reports: Sequence[BoundsReport], k: float = 3.0) -> None:
    """Chain checks: ``m <= mes <= M`` exactly and ``mf <= Mf`` up to ``k`` stderr."""
    for r in reports:
        check_chain(r.m, r.mes, r.M, tol=1e-12 * (1.0 + abs(r.M)), labels=["m", "mes", "M"])
        if r.mf is not None and r.Mf is not None:
            se = math.hypot(r.stderr.get("mf", 0.0), r.stderr.get("Mf", 0.0))
            check_chain(r.mf, r.Mf, tol=k * se + 1e-12, labels=["mf", "Mf"])


def _fmt(v) -> str:
    if v is None:
        return ""
    return "%.6g" % v


def write_bounds_csv(reports: Sequence[BoundsReport], target) -> None:
    """Write ``p,m,M,mf,Mf,mes,delta,srci,srci_f`` to a path or open text stream."""
    if hasattr(target, "write"):
        _write_bounds(reports, target)
    else:
        with open(target, "w", newline="") as fh:
            _write_bounds(reports, fh)


def _write_bounds(reports, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(OUTPUT_COLUMNS)
    for r in reports:
        w.writerow([_fmt(getattr(r, c)) for c in OUTPUT_COLUMNS])


# ---------------------------------------------------------------------------
# synthetic panels

ASSET_KINDS = ("normal", "comonotone", "antimonotone")


@dataclass(frozen=True)
class PlantedModel:
    tickers: tuple
    kinds: tuple
    mu: np.ndarray
    b: np.ndarray
    resid_sigma: np.ndarray


def synth_panel(
    n: int,
    kinds: Sequence[str],
    seed: int,
    *,
    tickers: Sequence[str] | None = None,
    resid_sigma: float = 0.01,
    start: str = "2005-01-03",
) -> tuple[LossPanel, FactorPanel, PlantedModel]:
    """Panels generated from a planted five-factor loss model.

    ``normal`` assets get iid normal residuals. ``comonotone`` assets get a
    large residual that is an increasing function of the market factor, so
    their losses drive the aggregate tail. ``antimonotone`` assets get a
    residual decreasing in the market and no market exposure, a hedge.
    """
    kinds = tuple(kinds)
    unknown = set(kinds) - set(ASSET_KINDS)
    if unknown:
        raise ValueError(f"unknown asset kind(s) {sorted(unknown)}; choose from {ASSET_KINDS}")
    d = len(kinds)
    tickers = tuple(tickers) if tickers is not None else tuple(f"A{i + 1}" for i in range(d))
    if len(tickers) != d:
        raise ValueError("one ticker per asset kind")
    rng = np.random.default_rng([seed, 0])
    factor_sd = np.array([0.011, 0.006, 0.006, 0.004, 0.004])
    Y = rng.standard_normal((n, 5)) * factor_sd
    rf = -np.full(n, 0.0001)  # stored as a loss
    mu = rng.normal(0.0, 2e-4, size=d)
    b = rng.normal(0.0, 0.3, size=(d, 5))
    b[:, 0] = rng.uniform(0.6, 1.4, size=d)
    sig = np.full(d, resid_sigma)
    Z = rng.standard_normal((n, d)) * resid_sigma
    market_rank = stats.norm.ppf((stats.rankdata(Y[:, 0]) - 0.5) / n)
    for i, kind in enumerate(kinds):
        if kind == "comonotone":
            sig[i] = 10.0 * resid_sigma
            Z[:, i] = sig[i] * market_rank
        elif kind == "antimonotone":
            b[i, 0] = 0.0
            Z[:, i] = -resid_sigma * market_rank
    X = rf[:, None] + mu + Y @ b.T + Z
    dates = pd.bdate_range(start, periods=n).to_numpy().astype("datetime64[D]")
    return (
        LossPanel(dates, tickers, X),
        FactorPanel(dates, Y, rf),
        PlantedModel(tickers, kinds, mu, b, sig),
    )


def write_loss_csv(panel: LossPanel, path) -> None:
    frame = pd.DataFrame(panel.losses, columns=list(panel.tickers))
    frame.insert(0, "date", [str(d) for d in panel.dates])
    frame.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")


def write_factor_csv(panel: FactorPanel, path, percent: bool = False) -> None:
    scale = 100.0 if percent else 1.0
    frame = pd.DataFrame(panel.factors * scale, columns=list(FACTOR_COLUMNS))
    frame["RF"] = -panel.rf * scale
    frame.insert(0, "date", [str(d) for d in panel.dates])
    frame.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
