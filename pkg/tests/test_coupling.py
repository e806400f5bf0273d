import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mesbounds.coupling import (
    AntimonotoneAt,
    Comonotone,
    Independent,
    Mix3Uniform,
    antimonotone_diagnostic,
    certify_coupling,
    couple,
    midpoint_grid,
    mix_uniform3,
    reversed_grid,
)
from mesbounds.distributions import Exponential, Normal, Uniform


def test_midpoint_grid():
    assert np.allclose(midpoint_grid(4), [0.125, 0.375, 0.625, 0.875])
    assert np.array_equal(reversed_grid(4), midpoint_grid(4)[::-1])


def test_comonotone_columns_share_ranks():
    cs = couple([Normal(0, 1), Exponential(2)], Comonotone(), 500)
    assert cs.values.shape == (500, 2)
    assert antimonotone_diagnostic(cs.column(0), cs.column(1)) == pytest.approx(1.0)


def test_antimonotone_column_reversed():
    u = Uniform(0, 1)
    cs = couple([u, u, u], AntimonotoneAt(1), 100)
    assert np.allclose(cs.column(0) + cs.column(1), 1.0)
    assert np.array_equal(cs.column(0), cs.column(2))


def test_independent_is_seeded_permutation():
    a = couple([Uniform(0, 1)] * 2, Independent(9), 1000)
    b = couple([Uniform(0, 1)] * 2, Independent(9), 1000)
    assert np.array_equal(a.values, b.values)
    # each column still a permutation of the grid
    assert np.array_equal(np.sort(a.column(1)), midpoint_grid(1000))
    assert abs(antimonotone_diagnostic(a.column(0), a.column(1))) < 0.1


def test_couple_errors():
    with pytest.raises(ValueError):
        couple([], Comonotone(), 10)
    with pytest.raises(ValueError):
        couple([Normal(0, 1)], Comonotone(), 1)
    with pytest.raises(ValueError):
        couple([Normal(0, 1)], AntimonotoneAt(3), 10)


@pytest.mark.parametrize("n", [2, 10, 1001, 100_000])
def test_mix_uniform3_constant_sum(n):
    cs = mix_uniform3(n)
    assert np.all(cs.sums == 1.5)
    # each column has the uniform grid as its empirical law
    for k in range(3):
        col = np.sort(cs.column(k))
        assert np.max(np.abs(col - midpoint_grid(n))) < 1.0 / n + 1e-12


def test_mix_via_couple():
    assert np.array_equal(couple([Uniform(0, 1)] * 3, Mix3Uniform(), 50).values, mix_uniform3(50).values)


def test_diagnostic_edge_cases():
    assert antimonotone_diagnostic([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert np.isnan(antimonotone_diagnostic([1, 1, 1], [1, 2, 3]))
    with pytest.raises(ValueError):
        antimonotone_diagnostic([1, 2], [1, 2, 3])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(-100, 100), min_size=3, max_size=40, unique=True))
def test_diagnostic_invariant_under_monotone_maps(xs):
    x = np.array(xs, dtype=float)
    assert antimonotone_diagnostic(x, np.exp(x / 50)) == pytest.approx(1.0)
    assert antimonotone_diagnostic(x, -x**3) == pytest.approx(-1.0)


def test_certify_coupling():
    assert certify_coupling(mix_uniform3(20).values, center=1.5)["mixable"]
    out = certify_coupling(couple([Uniform(0, 1)] * 3, Comonotone(), 20).values)
    assert not out["mixable"]
    assert out["center"] == pytest.approx(1.5)
