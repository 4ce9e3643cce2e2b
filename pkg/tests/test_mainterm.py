import math
import random

import mpmath
import numpy as np
import pytest

from divisor_moments.errors import RangeError, UsageError
from divisor_moments.mainterm import (
    d_coefficients,
    d_coefficients_euler,
    delta_k_eval,
    eval_Mk,
    eval_Mrk,
    expand_main_product,
    export_d_json,
    load_d_json,
    residue_main_poly,
    zeta_laurent,
)
from divisor_moments.multisum import build_multisum_table, delta_rk_eval
from divisor_moments.multivar import support_list
from divisor_moments.sieve import build_factor_sieve, build_tau_table


def test_stieltjes_constants(zl):
    assert abs(zl.gammas[0] - mpmath.mpf("0.5772156649015328606")) < 1e-19
    assert abs(zl.gammas[1] - mpmath.mpf("-0.0728158454836767249")) < 1e-19
    with mpmath.workdps(50):
        for j in range(6):
            assert abs(zl.gammas[j] - mpmath.stieltjes(j)) < mpmath.mpf(10) ** -45


def test_laurent_vs_zeta(zl):
    with mpmath.workdps(50):
        s = mpmath.mpf("1.01")
        err = abs(zl.evaluate(s) - mpmath.zeta(s))
        # first omitted term is gamma_6 (s-1)^6 / 6!, far below 1e-15
        assert err < mpmath.mpf(10) ** -15


def test_residue_k2(zl):
    p = residue_main_poly(2, zl)
    assert abs(p.coeffs[1] - 1) < 1e-40
    assert abs(p.coeffs[0] - (2 * zl.gammas[0] - 1)) < 1e-40


def test_residue_k3(p2, zl):
    g0, g1 = zl.gammas[0], zl.gammas[1]
    want = [3 * g0**2 - 3 * g1 - 3 * g0 + 1, 3 * g0 - 1, mpmath.mpf(1) / 2]
    for a, b in zip(p2.coeffs, want):
        assert abs(a - b) < 1e-40


def test_residue_vs_contour(zl):
    # residue of zeta^3 x^s / s at s = 1 by a small circle integral
    with mpmath.workdps(30):
        x = mpmath.mpf(7)
        f = lambda th: (lambda s: mpmath.zeta(s) ** 3 * x**s / s)(1 + mpmath.mpf("0.5") * mpmath.expj(th)) * mpmath.mpf("0.5") * mpmath.expj(th)
        res = mpmath.quad(f, [0, 2 * mpmath.pi]) / (2 * mpmath.pi)
        assert abs(res.real - eval_Mk(residue_main_poly(3, zl), x)) < 1e-20


@pytest.mark.parametrize("k", [2, 3, 4, 5, 6])
def test_leading_coefficient(zl, k):
    p = residue_main_poly(k, zl)
    assert len(p.coeffs) == k
    assert abs(p.coeffs[-1] - mpmath.mpf(1) / math.factorial(k - 1)) < 1e-40


def test_laurent_order_too_small():
    with pytest.raises(UsageError):
        residue_main_poly(6, zeta_laurent(3, 50))


def test_eval_Mk(p2, zl):
    assert abs(eval_Mk(p2, 1) - p2.coeffs[0]) < 1e-45
    g0, g1 = zl.gammas[0], zl.gammas[1]
    L = mpmath.log(5)
    want = 5 * (L**2 / 2 + (3 * g0 - 1) * L + 3 * g0**2 - 3 * g1 - 3 * g0 + 1)
    assert abs(eval_Mk(p2, 5) - want) < 1e-30
    assert abs(eval_Mk(p2, 5) - mpmath.mpf("14.7950996098")) < 1e-9


def test_Mk_monotone(p2):
    xs = np.geomspace(1, 1e6, 400)
    vals = [eval_Mk(p2, x) for x in xs]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    # derivative 1 + a1 + (2 a2 + a1) L + a2 L^2 ... positive: P + P'
    a = p2.coeffs
    for L in np.linspace(0, math.log(1e6), 200):
        assert a[0] + a[1] + (a[1] + 2 * a[2]) * L + a[2] * L**2 > 0


def test_delta3_values(tau3, p2):
    assert abs(delta_k_eval(tau3, p2, 5) - mpmath.mpf("1.2049003902")) < 1e-9
    assert abs(delta_k_eval(tau3, p2, 1) - (1 - p2.coeffs[0])) < 1e-45


def test_delta3_mean_small(tau3, p2):
    from divisor_moments.moments import integrate_first, model_from_tau

    T = 10**4
    mean = integrate_first(1, T, model_from_tau(tau3, p2)) / (T - 1)
    assert abs(mean) < T ** (1 / 3)


def test_delta3_residue_invariant(p2):
    # max |Delta_3| / x^0.46 over [1e3, 1e6] stays below 10
    sv = build_factor_sieve(10**6)
    t = build_tau_table(10**6, 3, sv)
    n = np.arange(10**3, 10**6)
    D = t.prefix_int64()[n].astype(float)
    c = [float(v) for v in p2.coeffs]
    M = lambda x: x * np.polyval(c[::-1], np.log(x))
    # Delta decreases on each [n, n+1): extremes at the two ends
    ratio = np.maximum(np.abs(D - M(n.astype(float))), np.abs(D - M(n + 1.0))) / n**0.46
    assert ratio.max() < 10


def test_expand_t1(zl):
    e = expand_main_product(3, 1, zl)
    g0, g1 = zl.gammas[0], zl.gammas[1]
    lam = mpmath.mpf("0.7")
    assert abs(e.C(2, [lam]) - mpmath.mpf(1) / 2) < 1e-40
    assert abs(e.C(1, [lam]) - ((3 * g0 - 1) - lam)) < 1e-40
    want0 = lam**2 / 2 - (3 * g0 - 1) * lam + (3 * g0**2 - 3 * g1 - 3 * g0 + 1)
    assert abs(e.C(0, [lam]) - want0) < 1e-40


def test_expand_t0(zl):
    e = expand_main_product(3, 0, zl)
    assert e.degree() == 0 and e.C(0, []) == 1
    assert set(e.coeffs[0]) == {()}


@pytest.mark.parametrize("k,t", [(3, 1), (3, 2), (3, 3), (4, 2)])
def test_expand_identity(zl, k, t):
    e = expand_main_product(k, t, zl)
    p = residue_main_poly(k, zl)
    rng = random.Random(k * 10 + t)
    with mpmath.workdps(50):
        for _ in range(50):
            L = mpmath.mpf(rng.uniform(0, 30))
            lam = [mpmath.mpf(rng.uniform(0, 10)) for _ in range(t)]
            lhs = mpmath.fprod(p(L - lj) for lj in lam)
            rhs = sum(e.C(l, lam) * L**l for l in range(e.degree() + 1))
            assert abs(lhs - rhs) <= mpmath.mpf(10) ** -30 * max(1, abs(lhs))


def test_C_float_matches(zl):
    e = expand_main_product(3, 2, zl)
    lam = np.array([[0.3, 1.7], [2.2, 0.0]])
    for l in range(5):
        v = e.C_float(l, lam)
        for i in range(2):
            assert abs(v[i] - float(e.C(l, [lam[0, i], lam[1, i]]))) < 1e-12


def test_d_single_term(sieve, lct23, zl):
    mm = d_coefficients(2, 3, 1, lct23, sieve, zl)
    e = expand_main_product(3, 2, zl)
    for l in range(5):
        assert abs(mm.d[l] - e.C(l, [0, 0])) < 1e-40


def test_d_top_coefficient(sieve, lct23, zl):
    X = 300
    mm = d_coefficients(2, 3, X, lct23, sieve, zl)
    ms, fs = support_list(X, 2, 3, sieve, lct23)
    F = mpmath.fsum(mpmath.mpf(int(f)) / (int(m[0]) * int(m[1])) for m, f in zip(ms.tolist(), fs.tolist()))
    assert abs(mm.d[4] - F / 4) < 1e-40


def test_d_euler_top_matches_F(lct23, zl):
    from divisor_moments.euler import taylor_coefficients_F

    mm = d_coefficients_euler(2, 3, zl, lct23)
    F = taylor_coefficients_F(lct23, 0, 1)
    assert abs(mm.d[4] - F[(0, 0)] / 4) < 1e-30


def test_d_direct_doubling(sieve, lct23, zl):
    a = d_coefficients(2, 3, 1000, lct23, sieve, zl)
    b = d_coefficients(2, 3, 2000, lct23, sieve, zl)
    for l in range(5):
        assert abs(a.d[l] - b.d[l]) < a.tail_estimate
    assert b.tail_estimate < a.tail_estimate


def test_d_direct_approaches_euler(sieve, lct23, zl):
    e = d_coefficients_euler(2, 3, zl, lct23)
    a = d_coefficients(2, 3, 2000, lct23, sieve, zl)
    for l in range(5):
        assert abs(a.d[l] - e.d[l]) < a.tail_estimate


def test_d_euler_independent_of_cut(lct23, zl):
    a = d_coefficients_euler(2, 3, zl, lct23, P0=100)
    b = d_coefficients_euler(2, 3, zl, lct23, P0=400)
    for u, v in zip(a.d, b.d):
        assert abs(u - v) < 1e-20


def test_eval_Mrk_at_one(lct23, zl):
    mm = d_coefficients_euler(2, 3, zl, lct23)
    assert abs(eval_Mrk(mm, 1) - mm.d[0]) < 1e-45
    with pytest.raises(RangeError):
        eval_Mrk(mm, 0.5)


def test_eval_Mrk_top_growth(lct23, zl):
    mm = d_coefficients_euler(2, 3, zl, lct23)
    errs = []
    with mpmath.workdps(50):
        for e in (10, 20, 50, 100):
            x = mpmath.mpf(10) ** e
            top = x**2 * mpmath.log(x) ** 4 * mm.d[4]
            errs.append(abs(eval_Mrk(mm, x) / top - 1))
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 0.1


def test_theorem1_error_at_1000(sieve, tau3, lct23, zl):
    # |S - M| at x = 1000 against x^(1 + alpha_3 + 0.05), unit constant
    mm = d_coefficients_euler(2, 3, zl, lct23)
    table = build_multisum_table(1000, tau3, support_list(1000, 2, 3, sieve, lct23))
    x = 1000
    assert abs(delta_rk_eval(x, table, mm)) <= x ** (1 + 43 / 96 + 0.05)


def test_d_json_roundtrip(lct23, zl):
    mm = d_coefficients_euler(2, 3, zl, lct23)
    text = export_d_json(mm)
    back = load_d_json(text)
    assert export_d_json(back, digits=mm.precision) == text
