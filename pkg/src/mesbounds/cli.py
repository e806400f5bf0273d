"""Command-line front end: ``mesbounds <subcommand> ...``.

Every subcommand writes CSV to ``--out`` (or stdout). Exit status is 0 on
success, 1 on a data error and 2 on a usage error.

Model files for ``bounds-factor`` are flat ``key = value`` lines::

    # additive background risk, two standard normal risks
    model  = additive          # additive | multiplicative | minimum
    factor = normal 0 1
    idio   = normal 0 1        # shared law, needs d; or idio1, idio2, ...
    d      = 2
    b      = 0.3 0.3
    sigma  = 0.9539392 0.9539392
    mu     = 0 0               # optional
    target = 1                 # 1-based
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import warnings
from contextlib import contextmanager
from typing import Sequence

import numpy as np

from . import __version__
from .bounds_core import BoundChainError, BoundsReport, check_chain
from .distributions import DomainError, InfiniteMeanError, make_law
from .empirical_pipeline import (
    DataError,
    align,
    empirical_bounds,
    ffm_fit,
    load_factor_csv,
    load_loss_csv,
    synth_panel,
    validate_reports,
    write_bounds_csv,
    write_factor_csv,
    write_loss_csv,
    ASSET_KINDS,
)
from .factor_bounds import (
    AdditiveModel,
    MinimumModel,
    MultiplicativeModel,
    abrm_normal_closed,
    factor_bounds_report,
)
from .linear_bounds import BivariateNormalSpec, bivariate_normal_mes, nonnegative_bounds, uniform3_verify

EXIT_OK, EXIT_DATA, EXIT_USAGE = 0, 1, 2

TABLE1_LOADINGS = (0.0, 0.3, 0.6, 0.9, 1.0)
TABLE1_PANELS = (("A", 1, 0.90), ("B", 1, 0.95), ("C", -1, 0.90), ("D", -1, 0.95))
TABLE2_LEVELS = (0.55, 0.65, 0.75, 0.85, 0.95)
SRCI_LEVELS = (0.99, 0.993, 0.995)


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument helpers


def parse_p_grid(text: str) -> list[float]:
    """``a:b:k`` gives ``k + 1`` evenly spaced levels; a comma list is taken as is."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"p-grid must be a:b:k, got {text!r}")
        try:
            a, b, k = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise argparse.ArgumentTypeError(f"p-grid must be a:b:k, got {text!r}") from None
        if k < 0 or not 0.0 <= a <= b < 1.0:
            raise argparse.ArgumentTypeError(f"p-grid needs 0 <= a <= b < 1 and k >= 0, got {text!r}")
        return [a] if k == 0 else [float(x) for x in np.linspace(a, b, k + 1)]
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad prudence level list {text!r}") from None
    if not values or any(not 0.0 <= v < 1.0 for v in values):
        raise argparse.ArgumentTypeError(f"prudence levels must lie in [0, 1), got {text!r}")
    return values


def parse_law(text: str):
    """``family:p1,p2`` such as ``lognormal:0,0.5``."""
    family, _, params = text.partition(":")
    try:
        values = [float(x) for x in params.split(",") if x.strip()]
        return make_law(family.strip(), *values)
    except (TypeError, ValueError) as exc:
        raise argparse.ArgumentTypeError(f"bad law {text!r}: {exc}") from None


@contextmanager
def _output(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _emit_rows(path, header, rows) -> None:
    with _output(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _g(v) -> str:
    if v is None:
        return ""
    return "%.6g" % v


# ---------------------------------------------------------------------------
# model files


def read_model_file(path) -> tuple[object, int]:
    """Parse a ``key = value`` model file; returns ``(model, target_index_0_based)``."""
    entries: dict[str, str] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise DataError(f"{path}:{lineno}: expected key = value")
            key = key.strip().lower()
            if key in entries:
                raise DataError(f"{path}:{lineno}: duplicate key {key!r}")
            entries[key] = value.strip()

    def need(key):
        if key not in entries:
            raise DataError(f"{path}: missing key {key!r}")
        return entries[key]

    def law(text):
        parts = text.replace(",", " ").split()
        if not parts:
            raise DataError(f"{path}: empty law specification")
        try:
            return make_law(parts[0], *map(float, parts[1:]))
        except (TypeError, ValueError) as exc:
            raise DataError(f"{path}: bad law {text!r}: {exc}") from None

    def vector(key, d, default=None):
        if key not in entries:
            if default is None:
                raise DataError(f"{path}: missing key {key!r}")
            return default
        try:
            vals = [float(x) for x in entries[key].replace(",", " ").split()]
        except ValueError:
            raise DataError(f"{path}: non-numeric entry in {key!r}") from None
        if len(vals) != d:
            raise DataError(f"{path}: {key!r} needs {d} values, got {len(vals)}")
        return vals

    kind = need("model").lower()
    factor = law(need("factor"))
    numbered = sorted((k for k in entries if k.startswith("idio") and k[4:].isdigit()), key=lambda k: int(k[4:]))
    if numbered:
        if [int(k[4:]) for k in numbered] != list(range(1, len(numbered) + 1)):
            raise DataError(f"{path}: idio keys must be idio1..idioN without gaps")
        idio = [law(entries[k]) for k in numbered]
    else:
        try:
            d = int(need("d"))
        except ValueError:
            raise DataError(f"{path}: d must be an integer") from None
        idio = [law(need("idio"))] * d
    d = len(idio)
    if d < 2:
        raise DataError(f"{path}: need at least two risks")
    try:
        target = int(entries.get("target", "1")) - 1
    except ValueError:
        raise DataError(f"{path}: target must be an integer") from None
    if not 0 <= target < d:
        raise DataError(f"{path}: target must lie in 1..{d}")

    if kind == "additive":
        model = AdditiveModel(vector("b", d), vector("sigma", d), factor, idio, vector("mu", d, [0.0] * d))
    elif kind == "multiplicative":
        model = MultiplicativeModel(vector("sigma", d), factor, idio)
    elif kind == "minimum":
        model = MinimumModel(factor, idio)
    else:
        raise DataError(f"{path}: unknown model {kind!r}; use additive, multiplicative or minimum")
    return model, target


# ---------------------------------------------------------------------------
# subcommands


def table1_rows() -> list[dict]:
    """Closed-form rows of the two-normal additive table."""
    rows = []
    for panel, sign, p in TABLE1_PANELS:
        for b1 in TABLE1_LOADINGS:
            c = b1 * b1  # printed MES column uses correlation b1^2 in every panel
            spec = BivariateNormalSpec(0.0, 0.0, 1.0, math.sqrt(2.0 * (1.0 + c)), rho=math.sqrt((1.0 + c) / 2.0))
            mes = bivariate_normal_mes(spec, p)
            Mf, mf, delta = abrm_normal_closed(b1, sign * b1, 0, p)
            M = make_law("normal", 0.0, 1.0).es(p)
            rows.append(dict(panel=panel, b1=b1, p=p, mes=mes, m=0.0, M=M, mf=mf, Mf=Mf, delta=delta))
    return rows


def _check_table1(rows) -> None:
    for r in rows:
        tol = 1e-12
        check_chain(r["m"], r["mf"], r["Mf"], r["M"], tol=tol, labels=["m", "mf", "Mf", "M"])
        check_chain(r["m"], r["mes"], r["M"], tol=tol, labels=["m", "MES", "M"])


def cmd_table1(args) -> int:
    rows = table1_rows()
    _check_table1(rows)
    out = [
        [r["panel"], "%.1f" % r["b1"], "%.2f" % r["p"], "%.3f" % r["mes"], "%.3f" % r["m"], "%.3f" % r["M"],
         "%.3f" % r["mf"], "%.3f" % r["Mf"], "%.2f%%" % (100.0 * r["delta"])]
        for r in rows
    ]
    _emit_rows(args.out, ["panel", "b1", "p", "MES", "m", "M", "mf", "Mf", "delta"], out)
    return EXIT_OK


def cmd_table2(args) -> int:
    rows = uniform3_verify(args.n)
    for r in rows:
        check_chain(r.m, r.ml, r.Ml, r.M, tol=1e-12, labels=["m", "ml", "Ml", "M"])
    out = [
        ["%.2f" % r.p, "%.3f" % r.m, "%.3f" % r.M, "%.3f" % r.ml, "%.3f" % r.Ml, "%.0f%%" % (100.0 * r.delta)]
        for r in rows
    ]
    _emit_rows(args.out, ["p", "m", "M", "ml", "Ml", "delta"], out)
    return EXIT_OK


def cmd_bounds_parametric(args) -> int:
    laws = args.law
    j = args.target - 1
    if not 0 <= j < len(laws):
        raise UsageError(f"--target must lie in 1..{len(laws)}")
    try:
        nonneg = len(laws) > 0 and nonnegative_bounds(laws, j, 0.5) is not None
    except (DomainError, InfiniteMeanError):
        nonneg = False
    rows = []
    for p in args.p_grid:
        law = laws[j]
        m, M = law.les(1.0 - p), law.es(p)
        ml, Ml = nonnegative_bounds(laws, j, p) if nonneg else (None, None)
        check_chain(m, ml, Ml, M, tol=1e-9 * (1.0 + abs(M)), labels=["m", "ml", "Ml", "M"])
        rows.append([_g(p), _g(m), _g(M), _g(ml), _g(Ml)])
    _emit_rows(args.out, ["p", "m", "M", "ml", "Ml"], rows)
    return EXIT_OK


def _report_rows(reports: Sequence[BoundsReport], path) -> None:
    with _output(path) as fh:
        write_bounds_csv(reports, fh)


def cmd_bounds_factor(args) -> int:
    model, target = read_model_file(args.model)
    reports = factor_bounds_report(
        model, target, args.p_grid, args.n, args.seed, lower=args.lower, factor_mode=args.factor_mode,
        workers=args.workers,
    )
    _report_rows(reports, args.out)
    return EXIT_OK


def _load_pipeline(args):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        losses = load_loss_csv(args.losses)
        factors = load_factor_csv(args.factors, percent=args.percent)
        losses, factors = align(losses, factors)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return losses, factors, ffm_fit(losses, factors)


def cmd_empirical(args) -> int:
    losses, factors, fit = _load_pipeline(args)
    if args.target not in losses.tickers:
        raise DataError(f"target {args.target!r} not among tickers")
    reports = empirical_bounds(losses, factors, fit, args.target, args.p_grid, args.n_syn, args.seed)
    validate_reports(reports)
    _report_rows(reports, args.out)
    return EXIT_OK


def cmd_srci(args) -> int:
    losses, factors, fit = _load_pipeline(args)
    targets = args.targets.split(",") if args.targets else list(losses.tickers)
    levels = args.p_grid or list(SRCI_LEVELS)
    rows = []
    for t in targets:
        if t not in losses.tickers:
            raise DataError(f"target {t!r} not among tickers")
        reports = empirical_bounds(losses, factors, fit, t, levels, args.n_syn, args.seed)
        validate_reports(reports)
        rows.append([t] + ["%.3f" % r.srci for r in reports] + ["%.3f" % r.srci_f for r in reports])
    header = ["asset"] + [f"beta_{p:g}" for p in levels] + [f"beta_f_{p:g}" for p in levels]
    _emit_rows(args.out, header, rows)
    return EXIT_OK


def cmd_synth_gen(args) -> int:
    tickers, kinds = [], []
    for item in args.assets.split(","):
        name, _, kind = item.partition(":")
        if not name or kind not in ASSET_KINDS:
            raise UsageError(f"--assets entries must be TICKER:KIND with KIND in {ASSET_KINDS}, got {item!r}")
        tickers.append(name.strip())
        kinds.append(kind)
    if len(set(tickers)) != len(tickers):
        raise UsageError("--assets has duplicate tickers")
    losses, factors, _ = synth_panel(args.n, kinds, args.seed, tickers=tickers)
    write_loss_csv(losses, args.losses_out)
    write_factor_csv(factors, args.factors_out, percent=args.percent)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _positive_int(text: str) -> int:
    try:
        v = int(float(text)) if "e" in text.lower() else int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mesbounds", description="Bounds on marginal expected shortfall.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_text):
        sp = sub.add_parser(name, help=help_text, description=help_text)
        sp.add_argument("--out", help="output CSV path (default: stdout)")
        sp.set_defaults(func=func)
        return sp

    add("table1", cmd_table1, "Closed-form bounds for two standard normal risks under additive background risk.")
    sp = add("table2", cmd_table2, "Bounds for three standard uniform risks with linear conditional means.")
    sp.add_argument("--n", type=_positive_int, default=10_000, help="grid size for the sample checks")

    sp = add("bounds-parametric", cmd_bounds_parametric, "Unconstrained (and non-negative linear) bounds for given laws.")
    sp.add_argument("--law", type=parse_law, action="append", required=True, help="family:params, repeat per risk")
    sp.add_argument("--target", type=int, default=1, help="1-based risk index")
    _p_args(sp, required=True)

    sp = add("bounds-factor", cmd_bounds_factor, "Monte Carlo constrained bounds for a background-risk model file.")
    sp.add_argument("--model", required=True, help="key = value model file")
    sp.add_argument("--n", type=_positive_int, default=100_000)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--lower", choices=("candidate", "certified"), default="candidate")
    sp.add_argument("--factor-mode", choices=("grid", "iid"), default="grid")
    sp.add_argument("--workers", type=_positive_int, default=1, help="threads for the certified lower bound")
    _p_args(sp, required=True)

    for name, func, text in (
        ("empirical", cmd_empirical, "Five-factor empirical bounds for one asset."),
        ("srci", cmd_srci, "Systemic risk criticality indices for several assets."),
    ):
        sp = add(name, func, text)
        sp.add_argument("--losses", required=True)
        sp.add_argument("--factors", required=True)
        sp.add_argument("--percent", action="store_true", help="factor file is in percent")
        sp.add_argument("--seed", type=int, required=True)
        sp.add_argument("--n-syn", type=_positive_int, default=None, help="synthetic rows (default 10 n)")
        if name == "empirical":
            sp.add_argument("--target", required=True)
            _p_args(sp, required=True)
        else:
            sp.add_argument("--targets", default=None, help="comma-separated tickers (default: all)")
            _p_args(sp, required=False)

    sp = add("synth-gen", cmd_synth_gen, "Write a synthetic loss/factor pair from a planted five-factor model.")
    sp.add_argument("--n", type=_positive_int, default=2000)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--assets", default="A1:normal,A2:normal,A3:normal,LEH:comonotone,HDG:antimonotone")
    sp.add_argument("--losses-out", required=True)
    sp.add_argument("--factors-out", required=True)
    sp.add_argument("--percent", action="store_true", help="write factors in percent")
    return parser


def _p_args(sp, required: bool) -> None:
    g = sp.add_mutually_exclusive_group(required=required)
    g.add_argument("--p-grid", type=parse_p_grid, dest="p_grid", help="a:b:k (k+1 levels) or a comma list")
    g.add_argument("--p", type=parse_p_grid, dest="p_grid", help="single level or comma list")


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DomainError, InfiniteMeanError, BoundChainError, KeyError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:  # pragma: no cover - console entry point
    sys.exit(run())


if __name__ == "__main__":  # pragma: no cover
    main()
