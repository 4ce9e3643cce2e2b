"""Euler products evaluated with an explicit head and an analytic prime tail.

Primes up to a cutoff P0 are multiplied in directly.  Beyond P0 the local
factors are expanded in p^-s and summed over primes through the prime
zeta function, computed from log zeta by Moebius inversion with the small
primes removed.
"""

import math
from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np

from .powerseries import (
    box_indices,
    exp_linear_series,
    mv_exp,
    mv_log,
    series_log,
    simplex_indices,
)
from .errors import RangeError
from .sieve import build_factor_sieve

DEFAULT_P0 = 200
DEFAULT_TAIL_DEGREE = 16


@lru_cache(maxsize=None)
def _small_primes(P0):
    return tuple(build_factor_sieve(max(P0, 2)).primes(P0).tolist())


@lru_cache(maxsize=None)
def _mobius(n):
    out = [0] * (n + 1)
    out[1] = 1
    for i in range(1, n + 1):
        for j in range(2 * i, n + 1, i):
            out[j] -= out[i]
    return tuple(out)


def log_zeta_tail_derivs(s, order, P0, dps):
    """Taylor coefficients in h of log(zeta(s+h) * prod_{p<=P0} (1 - p^-(s+h))).

    Returns ``order + 1`` coefficients.  Precision is raised internally to
    absorb the cancellation between log zeta and the small-prime sum.
    """
    s = mpmath.mpf(s)
    extra = int(s * math.log10(max(P0, 2))) + 10
    with mpmath.workdps(dps + extra):
        s = mpmath.mpf(s)
        z = [mpmath.zeta(s, 1, j) / math.factorial(j) for j in range(order + 1)]
        out = series_log(z, order + 1)
        eps = mpmath.mpf(10) ** (-(dps + extra))
        for p in _small_primes(P0):
            lp = mpmath.log(p)
            ps = mpmath.mpf(p) ** (-s)
            j = 1
            pj = ps
            while pj > eps:
                # -p^{-js}/j * exp(-j h log p)
                c = -pj / j
                for i in range(order + 1):
                    out[i] += c * (-j * lp) ** i / math.factorial(i)
                j += 1
                pj *= ps
        return [+v for v in out]


def prime_zeta_tail(sigma, order, P0=DEFAULT_P0, dps=40):
    """[sum_{p > P0} (log p)^i p^-sigma for i = 0..order]."""
    sigma = mpmath.mpf(sigma)
    if sigma <= 1:
        raise RangeError("prime zeta tail needs sigma > 1", "sigma")
    mu = _mobius(200)
    derivs = [mpmath.mpf(0)] * (order + 1)
    lg = math.log10(max(P0, 2))
    mmax = 1
    while (mmax - 1) * float(sigma) * lg < dps + 5:
        mmax += 1
    mmax = min(mmax, 200)
    with mpmath.workdps(dps + 10):
        for m in range(1, mmax + 1):
            if not mu[m]:
                continue
            ell = log_zeta_tail_derivs(m * sigma, order, P0, dps)
            for i in range(order + 1):
                # d^i/dsigma^i log zeta_tail(m sigma) = m^i * i! * ell[i]
                derivs[i] += mpmath.mpf(mu[m]) / m * m**i * math.factorial(i) * ell[i]
        return [(-1) ** i * derivs[i] for i in range(order + 1)]


def _weight_sums(r, nmax, amax):
    """W[alpha][n] = sum_{|nu|=n} prod nu_j^alpha_j as exact integers."""
    powers = {
        a: np.array([v**a if (v or a) else 1 for v in range(nmax + 1)], dtype=object)
        for a in range(amax + 1)
    }
    out = {}
    for alpha in box_indices((amax + 1,) * r):
        w = powers[alpha[0]]
        for a in alpha[1:]:
            w = np.convolve(w, powers[a])[: nmax + 1]
        out[alpha] = w
    return out


def _head_length(k, degree, sigma0, dps):
    """Length of the p = 2 head series so that the neglected terms fall below 10^-dps."""
    target = -(dps + 8) * math.log(10)
    n = 1
    while True:
        size = math.log(math.comb(n + k - 1, k - 1)) + degree * math.log(n + 1) - sigma0 * n * math.log(2)
        if n > 8 and size < target:
            return n + 2
        n += 1


def local_log_series(lct, degree):
    """Exact log of sum_nu c(nu) u^nu over total degree <= ``degree``."""
    index = simplex_indices(lct.r, degree)
    c = {nu: Fraction(lct.c[nu]) for nu in index if lct.c.get(nu)}
    return {nu: v for nu, v in mv_log(c, index).items() if v}


def taylor_coefficients_F(lct, order, sigma0=1, P0=DEFAULT_P0, tail_degree=DEFAULT_TAIL_DEGREE, dps=40):
    """Taylor coefficients of F(sigma0 + e_1, ..., sigma0 + e_r) in the e_j.

    Returns a dict alpha -> mpf for every alpha with all alpha_j <= order.
    Needs sigma0 > 1/2, the region where the kernel series converges.
    """
    r, k = lct.r, lct.k
    if tail_degree > lct.max_exp:
        raise ValueError("local table too small for the requested tail degree")
    sigma0 = mpmath.mpf(sigma0)
    box = box_indices((order + 1,) * r)
    with mpmath.workdps(dps + 10):
        eps = mpmath.mpf(10) ** (-(dps + 5))
        logF = {alpha: mpmath.mpf(0) for alpha in box}
        nmax_global = _head_length(k, r * order + r, float(sigma0), dps)
        weights = _weight_sums(r, nmax_global, order)
        for p in _small_primes(P0):
            lp = mpmath.log(p)
            u = mpmath.mpf(p) ** (-sigma0)
            # log of prod_j (1 - u e^{-e_j log p})^k, one variable at a time
            one = [-u * c for c in exp_linear_series(-lp, order + 1)]
            one[0] += 1
            la = [k * v for v in series_log(one, order + 1)]
            for j in range(r):
                for a in range(order + 1):
                    alpha = tuple(a if i == j else 0 for i in range(r))
                    logF[alpha] += la[a]
            # sum_n tau_k(p^n) u^n * sum_{|nu|=n} exp(-log p * nu.e)
            sp = {}
            for alpha in box:
                sp[alpha] = mpmath.mpf(0)
            un = mpmath.mpf(1)
            n = 0
            while True:
                tk = math.comb(n + k - 1, k - 1)
                base = tk * un
                if n > 4 and base * (n + 1) ** (r * order + r) < eps:
                    break
                if n > nmax_global:
                    raise RuntimeError("Euler head series did not converge")
                for alpha in box:
                    w = weights[alpha][n]
                    if w:
                        sp[alpha] += base * w
                un *= u
                n += 1
            for alpha in box:
                deg = sum(alpha)
                sp[alpha] *= (-lp) ** deg / math.prod(math.factorial(a) for a in alpha)
            s0 = sp[box[0]]
            ls = mv_log({a: v / s0 for a, v in sp.items()}, box)
            logF[box[0]] += mpmath.log(s0)
            for alpha, v in ls.items():
                logF[alpha] += v
        # primes beyond P0
        b = local_log_series(lct, tail_degree)
        maxd = r * order
        tails = {}
        for nu, bv in b.items():
            deg = sum(nu)
            if deg not in tails:
                tails[deg] = prime_zeta_tail(deg * sigma0, maxd, P0, dps)
            pi = tails[deg]
            bv = mpmath.mpf(bv.numerator) / bv.denominator
            for alpha in box:
                coef = mpmath.mpf(1)
                for nj, aj in zip(nu, alpha):
                    if aj:
                        coef *= mpmath.mpf(-nj) ** aj / math.factorial(aj)
                if coef:
                    logF[alpha] += bv * coef * pi[sum(alpha)]
        F = mv_exp(logF, box)
        F = {alpha: v * mpmath.exp(logF[box[0]]) for alpha, v in F.items()}
        return {alpha: +v for alpha, v in F.items()}


def tau3_square_zeta(sigma=None, P0=DEFAULT_P0, dps=40, degree=None):
    """sum_n tau_3(n)^2 n^-sigma as an Euler product (sigma > 1, default 4/3)."""
    with mpmath.workdps(dps + 10):
        sigma = mpmath.mpf(4) / 3 if sigma is None else mpmath.mpf(sigma)
    lg = math.log10(P0)
    if degree is None:
        degree = int((dps + 5) / (float(sigma) * lg)) + 6
    local = [Fraction(math.comb(v + 2, 2) ** 2) for v in range(degree + 1)]
    # exact log of the local series in u
    logc = [Fraction(0)] * (degree + 1)
    for m in range(1, degree + 1):
        acc = m * local[m]
        for i in range(1, m):
            acc -= i * logc[i] * local[m - i]
        logc[m] = acc / m
    with mpmath.workdps(dps + 10):
        total = mpmath.mpf(0)
        for p in _small_primes(P0):
            u = mpmath.mpf(p) ** (-sigma)
            v = mpmath.mpf(0)
            term = mpmath.mpf(1)
            n = 0
            while True:
                add = math.comb(n + 2, 2) ** 2 * term
                v += add
                if n > 5 and add < mpmath.mpf(10) ** (-(dps + 8)):
                    break
                term *= u
                n += 1
            total += mpmath.log(v)
        for j in range(1, degree + 1):
            if logc[j]:
                pz = prime_zeta_tail(j * sigma, 0, P0, dps)[0]
                total += mpmath.mpf(logc[j].numerator) / logc[j].denominator * pz
        return +mpmath.exp(total)
