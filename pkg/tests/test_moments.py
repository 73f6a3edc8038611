import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from dstprofile.errors import CapExceeded, DomainError
from dstprofile.moments import (CLOSED_CAP, EXTERNAL, INTERNAL, MU_CAP, NU_CAP,
                                charlier_coeffs, charlier_tau, depoissonize, internal_mean,
                                internal_mean_exact, internal_variance_exact, mean_closed,
                                mean_table_entry, poisson_eval, poisson_mean,
                                poissonized_variance, recurrence_tables,
                                second_moment_closed, second_table_entry,
                                unsuccessful_search_pmf, variance_exact)
from oracles import enumerate_all, mean_by_binomial


def _mpf(q):
    return mpmath.mpf(q.numerator) / q.denominator


# -- brute force over all bit assignments -----------------------------------

@pytest.mark.parametrize("n", range(0, 7))
def test_tables_match_enumeration(n):
    ref = enumerate_all(n)
    for k in range(n + 2):
        assert mean_table_entry(EXTERNAL, n, k) == ref["mu"].get(k, 0)
        assert second_table_entry(EXTERNAL, n, k) == ref["nu"].get(k, 0)
        assert mean_table_entry(INTERNAL, n, k) == ref["iota"].get(k, 0)
        assert second_table_entry(INTERNAL, n, k) == ref["iota2"].get(k, 0)


@pytest.mark.parametrize("n", range(0, 7))
def test_closed_forms_match_enumeration(n):
    ref = enumerate_all(n)
    for k in range(n + 1):
        assert mean_closed(n, k, exact=True) == ref["mu"].get(k, 0)
        assert second_moment_closed(n, k, exact=True) == ref["nu"].get(k, 0)
        v = ref["nu"].get(k, 0) - ref["mu"].get(k, 0) ** 2
        assert variance_exact(n, k, exact=True) == v


def test_small_rows():
    assert [mean_table_entry(EXTERNAL, 3, k) for k in range(4)] == \
        [0, Fraction(1, 2), Fraction(5, 2), 1]
    assert second_table_entry(EXTERNAL, 3, 2) == Fraction(17, 2)
    assert variance_exact(3, 2, exact=True) == Fraction(9, 4)
    assert [internal_mean_exact(3, k) for k in range(4)] == \
        [1, Fraction(3, 2), Fraction(1, 2), 0]


# -- recurrences -------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.integers(0, 24), st.integers(0, 26))
def test_mean_closed_matches_direct_recursion(n, k):
    assert mean_closed(n, k, exact=True) == mean_by_binomial(n, k)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 60))
def test_conservation_and_fundamental_relation(n):
    t = recurrence_tables(EXTERNAL, n, second=False)
    it = recurrence_tables(INTERNAL, n, second=False)
    assert sum(t.mu[n]) == n + 1
    assert sum(it.mu[n]) == n
    for k in range(n + 1):
        assert 2 * it.mu[n][k] == it.mu[n][k + 1] + t.mu[n][k + 1]


def test_table_variance_is_derived():
    t = recurrence_tables(EXTERNAL, 10)
    assert t.var[10][4] == t.nu[10][4] - t.mu[10][4] ** 2
    assert recurrence_tables(EXTERNAL, 10, second=False).nu is None


@settings(max_examples=25, deadline=None)
@given(st.integers(3, MU_CAP), st.data())
def test_multiprecision_mean_matches_exact(n, data):
    k = data.draw(st.integers(1, n))
    exact = _mpf(mean_table_entry(EXTERNAL, n, k))
    assert abs(mean_closed(n, k) - exact) <= 1e-30 * max(1, exact)


@settings(max_examples=8, deadline=None)
@given(st.integers(3, NU_CAP), st.data())
def test_multiprecision_second_moment_matches_table(n, data):
    k = data.draw(st.integers(1, n))
    exact = _mpf(second_table_entry(EXTERNAL, n, k))
    assert abs(second_moment_closed(n, k) - exact) <= 1e-30 * max(1, exact)
    var = variance_exact(n, k)
    assert var >= 0


def test_variance_zero_cases():
    for n, k in ((0, 0), (1, 1), (2, 2), (5, 0), (5, 6)):
        assert variance_exact(n, k) == 0
        assert variance_exact(n, k, exact=True) == 0
    assert variance_exact(3, 3, exact=True) > 0


def test_large_n_closed_forms():
    # B_{n,1} = 0 for n >= 2; conservation at n = 4096
    assert mean_closed(4096, 1) == 0 or abs(mean_closed(4096, 1)) < mpmath.mpf(10) ** -1000
    total = sum(mean_closed(4096, k) for k in range(0, 40))
    assert abs(total - 4097) < 1e-25


def test_caps_and_domains():
    with pytest.raises(CapExceeded):
        mean_table_entry(EXTERNAL, MU_CAP + 1, 3)
    with pytest.raises(CapExceeded):
        second_table_entry(EXTERNAL, NU_CAP + 1, 3)
    with pytest.raises(CapExceeded):
        recurrence_tables(EXTERNAL, NU_CAP + 1)
    with pytest.raises(CapExceeded):
        mean_closed(CLOSED_CAP + 1, 5)
    with pytest.raises(CapExceeded):
        mean_closed(CLOSED_CAP + 1, 5, exact=True)
    with pytest.raises(CapExceeded):
        internal_mean_exact(MU_CAP + 1, 3)
    with pytest.raises(DomainError):
        mean_closed(-1, 0)
    with pytest.raises(DomainError):
        recurrence_tables("leaf", 3)


# -- internal profile ----------------------------------------------------------

def test_internal_mean_beyond_table():
    n = 300
    assert abs(sum(internal_mean(n, k) for k in range(40)) - n) < 1e-25
    # fundamental relation with the external closed form
    for k in (6, 8, 10):
        lhs = 2 * internal_mean(n, k)
        rhs = internal_mean(n, k + 1) + mean_closed(n, k + 1)
        assert abs(lhs - rhs) < 1e-25


def test_internal_variance():
    ref = enumerate_all(6)
    for k in range(7):
        assert internal_variance_exact(6, k) == \
            ref["iota2"].get(k, 0) - ref["iota"].get(k, 0) ** 2


# -- Poisson model -------------------------------------------------------------

def _poisson_transform(coef, z, N):
    z = mpmath.mpf(z)
    return mpmath.exp(-z) * mpmath.fsum(coef(n) * z ** n / mpmath.factorial(n)
                                        for n in range(N + 1))


@pytest.mark.parametrize("k,z", [(2, 1.5), (4, 5.0), (6, 12.0)])
def test_poisson_mean_is_the_poisson_transform(k, z):
    ref = _poisson_transform(lambda n: _mpf(mean_table_entry(EXTERNAL, n, k)), z, MU_CAP)
    assert abs(poisson_mean(k, z) - ref) < 1e-30


@pytest.mark.parametrize("k,z", [(2, 1.0), (3, 3.0), (4, 4.0)])
def test_poissonized_variance_from_transforms(k, z):
    m1 = _poisson_transform(lambda n: _mpf(mean_table_entry(EXTERNAL, n, k)), z, NU_CAP)
    m2 = _poisson_transform(lambda n: _mpf(second_table_entry(EXTERNAL, n, k)), z, NU_CAP)
    d1 = poisson_mean(k, z, 1)
    ref = m2 - m1 ** 2 - z * d1 ** 2
    assert abs(poissonized_variance(k, z) - ref) < 1e-25
    full = poissonized_variance(k, z, include_diagonal=True)
    assert abs(full - ref) < 1e-25


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 12), st.floats(0.1, 50), st.integers(1, 3))
def test_poisson_mean_derivatives(k, z, m):
    num = mpmath.diff(lambda t: poisson_mean(k, t), z, m, h=mpmath.mpf(2) ** -30)
    assert abs(poisson_mean(k, z, m) - num) <= 1e-15 * max(1, abs(num))


def test_poisson_eval_bundle():
    pe = poisson_eval(3, 2.0, orders=3, with_variance=True)
    assert len(pe.derivatives) == 3
    assert pe.variance == poissonized_variance(3, 2.0)


# -- de-Poissonization ---------------------------------------------------------

def test_charlier_tau_low_orders():
    for n in range(0, 30):
        assert charlier_tau(0, n) == 1
        assert charlier_tau(1, n) == 0
        assert charlier_tau(2, n) == -n
        assert charlier_tau(3, n) == 2 * n
    assert charlier_tau(4, 3) == 9
    assert charlier_coeffs(3, 5).tau == [1, 0, -5, 10]


@given(st.integers(0, 200))
def test_depoissonize_polynomials_exactly(n):
    # the Poisson transform of n^2 is z^2 + z
    def f(m, z):
        return [z * z + z, 2 * z + 1, mpmath.mpf(2)][m] if m < 3 else mpmath.mpf(0)

    assert depoissonize(0, n, order=3, func=f) == n * n


def test_depoissonized_mean_is_close():
    # threshold frozen in tests/golden.json
    import json
    from pathlib import Path
    g = json.loads((Path(__file__).parent / "golden.json").read_text())
    d = g["depoissonize_mean_n20_k3"]
    got = depoissonize(3, 20)
    assert abs(got - _mpf(mean_table_entry(EXTERNAL, 20, 3))) <= d["bound"]


def test_unsuccessful_search_pmf():
    for n in (0, 5, 40, 150):
        pmf = unsuccessful_search_pmf(n)
        assert sum(pmf) == 1
        assert all(p >= 0 for p in pmf)
    ref = enumerate_all(5)["mu"]
    assert unsuccessful_search_pmf(5) == [ref.get(k, 0) / 6 for k in range(6)]
    approx = unsuccessful_search_pmf(300, exact=False)
    assert abs(mpmath.fsum(approx) - 1) < 1e-25
