"""Truncated power series in one and several variables.

Univariate series are plain lists of coefficients (index = degree).
Multivariate series are dicts keyed by exponent tuples over a
down-closed index set (a box or a simplex), so products, logs and
exponentials stay consistent under truncation.
"""

import itertools
import math

import mpmath
import numpy as np


# -- univariate ----------------------------------------------------------

def series_mul(a, b, n):
    out = [0] * n
    for i, ai in enumerate(a[:n]):
        if not ai:
            continue
        for j, bj in enumerate(b[: n - i]):
            out[i + j] += ai * bj
    return out


def series_pow(a, e, n):
    out = [1] + [0] * (n - 1)
    base = list(a[:n])
    while e:
        if e & 1:
            out = series_mul(out, base, n)
        e >>= 1
        if e:
            base = series_mul(base, base, n)
    return out


def series_inv(a, n):
    out = [0] * n
    out[0] = 1 / a[0]
    for m in range(1, n):
        acc = 0
        for i in range(1, min(m, len(a) - 1) + 1):
            acc += a[i] * out[m - i]
        out[m] = -acc * out[0]
    return out


def series_log(a, n):
    """log(a) for a[0] > 0, via a * (log a)' = a'."""
    a = list(a[:n]) + [0] * max(0, n - len(a))
    out = [0] * n
    out[0] = mpmath.log(a[0])
    for m in range(1, n):
        acc = m * a[m]
        for i in range(1, m):
            acc -= i * out[i] * a[m - i]
        out[m] = acc / (m * a[0])
    return out


def series_exp(g, n):
    g = list(g[:n]) + [0] * max(0, n - len(g))
    out = [0] * n
    out[0] = mpmath.exp(g[0])
    for m in range(1, n):
        acc = 0
        for i in range(1, m + 1):
            acc += i * g[i] * out[m - i]
        out[m] = acc / m
    return out


def exp_linear_series(c, n):
    """Coefficients of exp(c*e) up to e^(n-1)."""
    out = [mpmath.mpf(1)]
    for m in range(1, n):
        out.append(out[-1] * c / m)
    return out


def poly_eval(coeffs, x):
    acc = 0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def poly_derivative(coeffs):
    return [i * c for i, c in enumerate(coeffs)][1:] or [0]


# -- multivariate --------------------------------------------------------

def box_indices(shape):
    """All exponent tuples in the box, sorted by total degree."""
    idx = list(itertools.product(*(range(s) for s in shape)))
    idx.sort(key=lambda v: (sum(v), v))
    return idx


def simplex_indices(r, maxdeg):
    idx = [v for v in itertools.product(range(maxdeg + 1), repeat=r) if sum(v) <= maxdeg]
    idx.sort(key=lambda v: (sum(v), v))
    return idx


def _below(nu):
    return itertools.product(*(range(v + 1) for v in nu))


def mv_mul(a, b, index):
    allowed = set(index)
    out = {}
    for u, au in a.items():
        if not au:
            continue
        for v, bv in b.items():
            if not bv:
                continue
            w = tuple(x + y for x, y in zip(u, v))
            if w in allowed:
                out[w] = out.get(w, 0) + au * bv
    return out


def mv_log(f, index):
    """log f over a down-closed index set; f at the zero tuple must be 1.

    Uses the Euler operator: |nu| F_nu = sum |lam| G_lam F_(nu-lam).
    """
    zero = index[0]
    if sum(zero) != 0:
        raise ValueError("index set must start at the zero tuple")
    c0 = f.get(zero, 0)
    if c0 != 1:
        raise ValueError("constant term must be 1")
    g = {}
    for nu in index[1:]:
        deg = sum(nu)
        acc = deg * f.get(nu, 0)
        for lam in _below(nu):
            dl = sum(lam)
            if dl == 0 or dl == deg:
                continue
            gl = g.get(lam)
            if not gl:
                continue
            rest = f.get(tuple(x - y for x, y in zip(nu, lam)))
            if rest:
                acc -= dl * gl * rest
        g[nu] = acc / deg
    return g


def mv_exp(g, index):
    """exp g over a down-closed index set; g at the zero tuple is ignored (taken 0)."""
    zero = index[0]
    f = {zero: 1}
    for nu in index[1:]:
        deg = sum(nu)
        acc = 0
        for lam in _below(nu):
            dl = sum(lam)
            if dl == 0:
                continue
            gl = g.get(lam)
            if not gl:
                continue
            rest = f.get(tuple(x - y for x, y in zip(nu, lam)))
            if rest:
                acc += dl * gl * rest
        f[nu] = acc / deg
    return f


def dense_box_mul(a, b):
    """Product of two dense object arrays truncated to the shape of ``a``.

    Exact when entries are Python ints.
    """
    shape = a.shape
    out = np.zeros(shape, dtype=object)
    for idx in zip(*np.nonzero(a)):
        sub = b[tuple(slice(0, min(s - i, bs)) for s, i, bs in zip(shape, idx, b.shape))]
        dst = tuple(slice(i, i + n) for i, n in zip(idx, sub.shape))
        out[dst] = out[dst] + a[idx] * sub
    return out


def binom_row(k, n):
    return [math.comb(k, i) for i in range(n)]
