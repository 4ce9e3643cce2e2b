import random

import mpmath
import numpy as np
import pytest

from divisor_moments.errors import BudgetExceeded, RangeError
from divisor_moments.mainterm import d_coefficients_euler, delta_k_eval, eval_Mk
from divisor_moments.moments import fit_exponent
from divisor_moments.multisum import (
    build_multisum_table,
    delta_rk_eval,
    delta_star_eval,
    multisum_brute,
    multisum_brute_table,
    multisum_csv,
    multisum_fast,
)
from divisor_moments.multivar import local_coefficients, support_list


@pytest.fixture(scope="module")
def sup23(sieve, lct23):
    return support_list(10**5, 2, 3, sieve, lct23)


@pytest.fixture(scope="module")
def table23(tau3, sup23):
    return build_multisum_table(10**5, tau3, sup23)


@pytest.fixture(scope="module")
def mm23(zl, lct23):
    return d_coefficients_euler(2, 3, zl, lct23)


def test_brute_examples(sieve):
    assert multisum_brute(2, 2, 3, sieve) == 13
    assert multisum_brute(2, 3, 3, sieve) == 38
    for r in (1, 2, 3):
        assert multisum_brute(1, r, 3, sieve) == 1


def test_brute_budget(sieve):
    with pytest.raises(BudgetExceeded):
        multisum_brute(1000, 3, 3, sieve)


def test_fast_examples(tau3, sup23):
    assert multisum_fast(2, tau3, sup23) == 13 == 1 * 4**2 + (-3) * 1**2
    assert multisum_fast(1, tau3, sup23) == 1


def test_fast_vs_brute_small(sieve, tau3, sup23, lct33):
    want = multisum_brute_table(60, 2, 3, sieve)
    assert [multisum_fast(n, tau3, sup23) for n in range(61)] == want
    sup3 = support_list(15, 3, 3, sieve, lct33)
    want3 = multisum_brute_table(15, 3, 3, sieve)
    assert [multisum_fast(n, tau3, sup3) for n in range(16)] == want3


def test_table_first_values(table23, sieve):
    assert [table23[n] for n in range(1, 5)] == multisum_brute_table(4, 2, 3, sieve)[1:]
    assert [table23[n] for n in range(1, 5)] == [1, 13, 43, 126]


def test_table_monotone(table23):
    S = table23.S
    assert all(S[n] <= S[n + 1] for n in range(table23.limit))


def test_table_spot_brute(sieve, table23):
    rng = random.Random(11)
    for n in rng.sample(range(1, 1001), 20):
        assert table23[n] == multisum_brute(n, 2, 3, sieve)


def test_table_vs_fast(tau3, sup23, table23):
    rng = random.Random(5)
    for n in rng.sample(range(1, 10**5 + 1), 10):
        assert table23[n] == multisum_fast(n, tau3, sup23)


def test_table_r3_wide_path(sieve, tau3, lct33):
    sup3 = support_list(30, 3, 3, sieve, lct33)
    t = build_multisum_table(30, tau3, sup3)
    assert list(t.S) == multisum_brute_table(30, 3, 3, sieve)


def test_table_k4(sieve, tau4, lct24):
    t = build_multisum_table(80, tau4, support_list(80, 2, 4, sieve, lct24))
    assert list(t.S) == multisum_brute_table(80, 2, 4, sieve)


def test_step_jump(table23, mm23):
    below = delta_rk_eval(mpmath.mpf(2) - mpmath.mpf(10) ** -30, table23, mm23)
    at = delta_rk_eval(2, table23, mm23)
    assert abs((at - below) - 12) < 1e-20


def test_decreasing_between_integers(table23, mm23):
    for n in (1, 5, 99, 5000):
        xs = [n + f for f in np.linspace(0, 0.999, 25)]
        vals = [delta_rk_eval(x, table23, mm23) for x in xs]
        assert all(b < a for a, b in zip(vals, vals[1:]))


def test_delta_range(table23, mm23):
    with pytest.raises(RangeError):
        delta_rk_eval(0.5, table23, mm23)
    with pytest.raises(RangeError):
        delta_rk_eval(10**5 + 1, table23, mm23)


def test_delta_growth_shape(table23, mm23):
    # block maxima of |Delta_{2,3}| over dyadic blocks in [1e2, 1e5] grow no faster than x^(1.45 + 0.05)
    S = np.array([float(v) for v in table23.S.tolist()])
    d = [float(v) for v in mm23.d]
    M = lambda x: x**2 * np.polyval(d[::-1], np.log(x))
    pairs = []
    lo = 128
    while 2 * lo <= 10**5:
        n = np.arange(lo, 2 * lo)
        peak = np.maximum(np.abs(S[n] - M(n.astype(float))), np.abs(S[n] - M(n + 1.0))).max()
        pairs.append((2 * lo, peak))
        lo *= 2
    assert fit_exponent(pairs) <= 1.45 + 0.05


def test_delta_star_x10(tau3, p2, sup23):
    x = mpmath.mpf(10)
    ref = mpmath.mpf(0)
    for m, f in zip(sup23[0].tolist(), sup23[1].tolist()):
        if max(m) <= 10:
            ref += f * eval_Mk(p2, x / m[0]) * delta_k_eval(tau3, p2, x / m[1])
    assert abs(delta_star_eval(x, tau3, p2, sup23) - 2 * ref) < 1e-35


def test_delta_star_small_x(tau3, p2, sup23):
    x = mpmath.mpf("1.7")
    want = 2 * eval_Mk(p2, x) * delta_k_eval(tau3, p2, x)
    assert abs(delta_star_eval(x, tau3, p2, sup23) - want) < 1e-40


def test_delta_vs_delta_star(tau3, p2, sup23, table23, mm23):
    for x in (100.5, 1000.5, 3000.5, 9999.5):
        diff = delta_rk_eval(x, table23, mm23) - delta_star_eval(x, tau3, p2, sup23)
        assert abs(diff) <= x ** 1.1


def test_cancellation_safety(table23, mm23):
    rng = random.Random(2)
    for _ in range(10):
        x = mpmath.mpf(rng.uniform(1, 10**5))
        with mpmath.workdps(38):
            a = delta_rk_eval(x, table23, mm23)
        with mpmath.workdps(60):
            b = delta_rk_eval(x, table23, mm23)
        assert abs(a - b) <= mpmath.mpf(10) ** -15 * abs(b)


def test_csv(table23, mm23):
    text = multisum_csv(table23, mm23, 20, rows=[1, 2, 3])
    lines = text.splitlines()
    assert lines[0] == "n,S,delta_mid"
    assert lines[2].startswith("2,13,")
