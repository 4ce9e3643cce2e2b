import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from divisor_moments.errors import OverflowDetected, RangeError, UsageError
from divisor_moments.sieve import (
    build_factor_sieve,
    build_tau_table,
    factorize,
    load_tau_table,
    save_tau_table,
    summatory,
    tau_k_of_factored,
)


def trial_spf(n):
    d = 2
    while d * d <= n:
        if n % d == 0:
            return d
        d += 1
    return n


def trial_factor(n):
    out, d = [], 2
    while d * d <= n:
        e = 0
        while n % d == 0:
            n //= d
            e += 1
        if e:
            out.append((d, e))
        d += 1
    if n > 1:
        out.append((n, 1))
    return out


def test_small_spf():
    sv = build_factor_sieve(10)
    assert [int(v) for v in sv.spf[2:11]] == [2, 3, 2, 5, 2, 7, 2, 3, 2]
    assert sv.spf[9] == 3


def test_spf_prime(sieve):
    assert sieve.spf[7919] == 7919
    assert sieve.is_prime(7919)


def test_spf_matches_trial_division(sieve):
    for n in range(2, 10**4 + 1):
        assert sieve.spf[n] == trial_spf(n)


def test_spf_properties(sieve):
    primes = set(int(p) for p in sieve.primes(2000))
    for n in range(2, 2001):
        p = int(sieve.spf[n])
        assert n % p == 0 and p in primes
        assert all(n % q for q in primes if q < p)


def test_factorize_examples(sieve):
    assert factorize(360, sieve).factors == ((2, 3), (3, 2), (5, 1))
    assert factorize(1, sieve).factors == ()


def test_factorize_matches_trial(sieve):
    for n in range(1, 10**4 + 1):
        assert list(factorize(n, sieve).factors) == trial_factor(n)


def test_factorize_range(sieve):
    with pytest.raises(RangeError):
        factorize(10**5 + 1, sieve)


def test_bad_sieve_limit():
    with pytest.raises(UsageError):
        build_factor_sieve(1)


def test_tau_values(sieve):
    assert tau_k_of_factored(factorize(4, sieve), 3) == 6
    assert tau_k_of_factored(factorize(1, sieve), 3) == 1
    assert tau_k_of_factored(factorize(6, sieve), 3) == 9
    # brute count of ordered triples with abc = 6
    assert sum(1 for a in range(1, 7) for b in range(1, 7) if 6 % (a * b) == 0) == 9


def test_tau_table_small():
    sv = build_factor_sieve(10)
    t = build_tau_table(10, 3, sv)
    assert [int(v) for v in t.tau[1:11]] == [1, 3, 3, 6, 3, 9, 3, 10, 6, 9]
    assert t.prefix[10] == 53
    assert t.prefix[1] == 1


def test_summatory(tau3):
    assert summatory(tau3, 5.9) == 16
    assert summatory(tau3, 0.5) == 0
    assert summatory(tau3, 10) == 53


def test_prefix_exact(tau3):
    assert int(tau3.prefix[tau3.limit]) == sum(int(v) for v in tau3.tau[1:].tolist())


def test_hyperbola_consistency(sieve, tau3):
    tau2 = build_tau_table(10**4, 2, sieve)
    for X in (1, 7, 100, 999, 10**4):
        assert summatory(tau3, X) == sum(summatory(tau2, X // d) for d in range(1, X + 1))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 1000), st.integers(1, 1000), st.sampled_from([3, 4, 5]))
def test_multiplicativity(a, b, k):
    sv = _SV
    if math.gcd(a, b) != 1:
        return
    t = lambda n: tau_k_of_factored(factorize(n, sv), k)
    assert t(a * b) == t(a) * t(b)


_SV = build_factor_sieve(10**6)


def test_checked_overflow():
    with pytest.raises(OverflowDetected):
        tau_k_of_factored({2: 200}, 40)


def test_cache_roundtrip(tmp_path, sieve):
    t = build_tau_table(1000, 4, sieve)
    save_tau_table(t, tmp_path / "t.dmt")
    u = load_tau_table(tmp_path / "t.dmt")
    assert u.k == 4 and u.limit == 1000
    assert (u.tau == t.tau).all()
    assert list(u.prefix) == list(t.prefix)


def test_random_tau_against_divisor_count(sieve):
    rng = random.Random(7)
    for _ in range(50):
        n = rng.randint(1, 3000)
        # tau_3(n) = sum_{d | n} tau_2(d)
        t3 = sum(sum(1 for e in range(1, d + 1) if d % e == 0) for d in range(1, n + 1) if n % d == 0)
        assert tau_k_of_factored(factorize(n, sieve), 3) == t3
