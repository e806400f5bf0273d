import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mesbounds.bounds_core import (
    BoundChainError,
    BoundsReport,
    TailConvention,
    check_chain,
    mes_estimate,
    mes_from_samples,
    mes_mc,
    spread_delta,
    tail_ecdf,
    tail_mask,
    unconstrained_lower,
    unconstrained_upper,
)
from mesbounds.coupling import AntimonotoneAt, Comonotone, couple
from mesbounds.distributions import EmpiricalLaw, Exponential, Normal, Uniform


def test_unconstrained_pair():
    law = Normal(0, 1)
    assert unconstrained_upper(law, 0.9) == pytest.approx(1.7549833193248685)
    assert unconstrained_lower(law, 0.9) == pytest.approx(-1.7549833193248685)


def test_tail_mask_sizes():
    s = np.arange(100.0)
    assert tail_mask(s, 0.9).sum() == 10
    assert tail_mask(s, 0.0).all()
    assert tail_mask(s, 0.9, TailConvention.WEAK).sum() == 11


def test_mes_small_sample():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    s = np.array([10.0, 40.0, 30.0, 20.0])
    # VaR_0.5 is the 2nd smallest sum (20); strict tail = rows with 30, 40
    assert mes_from_samples(x, s, 0.5) == pytest.approx(2.5)


def test_constant_sum_falls_back_to_mean():
    x = np.array([0.1, 0.9, 0.4, 0.6])
    assert mes_from_samples(x, np.ones(4), 0.95) == pytest.approx(0.5)


def test_mes_estimate_stderr():
    x = np.arange(10.0)
    est = mes_estimate(x, x, 0.5)
    tail = x[5:]
    assert est.n_tail == 5
    assert est.stderr == pytest.approx(tail.std(ddof=1) / math.sqrt(5))
    assert float(est) == est.value


def test_mes_estimate_validation():
    with pytest.raises(ValueError):
        mes_estimate([1.0, 2.0], [1.0], 0.5)
    with pytest.raises(ValueError):
        mes_estimate([1.0], [1.0], 0.5)


def test_comonotone_attains_es_and_antimonotone_les():
    law = Exponential(1.0)
    n = 20_000
    co = couple([law, Uniform(0, 1)], Comonotone(), n)
    # grid discretisation bias is O(log n / n) in the tail
    assert mes_from_samples(co.column(0), co.sums, 0.9) == pytest.approx(law.es(0.9), rel=2e-3)
    # symmetric pair: X_j + X_{-j} is constant, so MES falls back to the mean
    pair = couple([Normal(0, 1), Normal(0, 1)], AntimonotoneAt(1), n)
    assert mes_from_samples(pair.column(0), pair.sums, 0.9) == pytest.approx(0.0, abs=1e-12)
    # antimonotone pair with S increasing in X_j's complement reaches LES
    x = couple([law, law], AntimonotoneAt(1), n)
    s = 0.1 * x.column(0) + x.column(1)
    assert mes_from_samples(x.column(0), s, 0.9) == pytest.approx(law.les(0.1), rel=1e-2)


def _sampler(rng, m):
    z = rng.standard_normal((m, 2))
    return z[:, 0], z.sum(axis=1)


def test_mes_mc_worker_invariance_and_value():
    a = mes_mc(_sampler, 0.9, 200_000, seed=4, workers=1, chunk=1 << 14)
    b = mes_mc(_sampler, 0.9, 200_000, seed=4, workers=3, chunk=1 << 14)
    assert a == b
    # independent standard normals: MES = ES_p(S)/2 = phi(z_p)/(1-p) / sqrt 2
    exact = 1.7549833193248685 / math.sqrt(2)
    assert abs(a.value - exact) < 3 * a.stderr + 2e-3


def test_mes_mc_requires_size():
    with pytest.raises(ValueError):
        mes_mc(_sampler, 0.9, 10, seed=0)


def test_spread_delta():
    assert spread_delta(0.0, 2.0, 0.5, 1.5) == 0.5
    assert spread_delta(1.0, 1.0, 1.0, 1.0) == 1.0
    with pytest.raises(BoundChainError):
        spread_delta(2.0, 1.0, 1.0, 1.5)
    with pytest.raises(BoundChainError):
        spread_delta(0.0, 2.0, 1.5, 1.0)
    assert spread_delta(0.0, 2.0, 1.5, 1.0, strict=False) == pytest.approx(1.25)


def test_check_chain():
    check_chain(0.0, None, 1.0, 1.0)
    check_chain(0.0, 1.0 + 1e-9, 1.0, tol=1e-8)
    with pytest.raises(BoundChainError, match="b=2"):
        check_chain(1.0, 2.0, 0.5, labels=["a", "b", "c"])


def test_report_replace():
    r = BoundsReport(0.9, 0.0, 1.0)
    assert r.with_(mes=0.5).mes == 0.5 and r.mes is None


def test_tail_ecdf():
    x = np.arange(10.0)
    f = tail_ecdf(x, x, 0.5, [4.0, 5.0, 9.0])
    assert np.allclose(f, [0.0, 0.2, 1.0])


@settings(max_examples=60, deadline=None)
@given(
    st.integers(5, 80).flatmap(
        lambda n: st.tuples(
            st.lists(st.integers(-10**6, 10**6), min_size=n, max_size=n),
            st.lists(st.integers(-10**6, 10**6), min_size=n, max_size=n, unique=True),
        )
    ),
    st.floats(0.0, 0.95),
)
def test_sample_mes_between_empirical_les_and_es(pair, p):
    # distinct sums: the tail holds exactly n - ceil(p n) rows
    x, s = (np.asarray(v, dtype=float) for v in pair)
    law = EmpiricalLaw(x)
    mes = mes_from_samples(x, s, p)
    assert law.les(1 - p) - 1e-6 <= mes <= law.es(p) + 1e-6
