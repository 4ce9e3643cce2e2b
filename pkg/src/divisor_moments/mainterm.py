"""Main terms: Stieltjes constants, residue polynomials and the multivariable constants.

M_k(x) = x P_{k-1}(log x) is the residue of zeta(s)^k x^s / s at s = 1.
M_{r,k}(x) = x^r sum_l d_l (log x)^l with d_l built from the kernel f.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import mpmath

from .errors import BudgetExceeded, RangeError, UsageError
from .euler import DEFAULT_P0, DEFAULT_TAIL_DEGREE, taylor_coefficients_F
from .multivar import DEFAULT_SUPPORT_BUDGET, enumerate_support
from .powerseries import poly_derivative, poly_eval, series_mul, series_pow
from .sieve import summatory

MIN_DIGITS = 38


@dataclass(frozen=True)
class ZetaLaurent:
    order: int
    gammas: tuple
    precision: int

    def coefficients(self):
        """c_j with zeta(s) = 1/(s-1) + sum_j c_j (s-1)^j."""
        return [(-1) ** j * g / math.factorial(j) for j, g in enumerate(self.gammas)]

    def evaluate(self, s):
        e = mpmath.mpf(s) - 1
        return 1 / e + poly_eval(self.coefficients(), e)


@dataclass(frozen=True)
class MainTermPoly:
    k: int
    coeffs: tuple

    def __call__(self, L):
        return poly_eval(self.coeffs, L)


@dataclass(frozen=True)
class LogProductExpansion:
    k: int
    t: int
    coeffs: tuple  # coeffs[l] = {lambda exponent tuple: coefficient}
    r: int | None = None

    def degree(self):
        return len(self.coeffs) - 1

    def C(self, l, lam):
        acc = mpmath.mpf(0)
        for mono, c in self.coeffs[l].items():
            term = c
            for lj, e in zip(lam, mono):
                if e:
                    term *= lj**e
            acc += term
        return acc

    def C_float(self, l, lam):
        """Vectorized float evaluation; ``lam`` has shape (t, n)."""
        import numpy as np

        out = 0.0
        for mono, c in self.coeffs[l].items():
            term = float(c)
            for lj, e in zip(lam, mono):
                if e:
                    term = term * np.asarray(lj, dtype=float) ** e
            out = out + term
        return out + np.zeros(np.shape(lam)[1:])


@dataclass(frozen=True)
class MultiMainTerm:
    r: int
    k: int
    d: tuple
    truncation_limit: int
    tail_estimate: object
    method: str = "direct"
    precision: int = MIN_DIGITS
    extras: dict = field(default_factory=dict, compare=False, repr=False)

    def poly(self):
        return list(self.d)


# -- Stieltjes constants -------------------------------------------------

def _stieltjes_em(j, dps, N, K):
    """gamma_j by Euler-Maclaurin summation of (log n)^j / n from N on."""
    with mpmath.workdps(dps):
        acc = mpmath.fsum(mpmath.log(n) ** j / n for n in range(2, N)) if j else mpmath.fsum(
            mpmath.mpf(1) / n for n in range(1, N)
        )
        LN = mpmath.log(N)
        acc += LN**j / (2 * N) - LN ** (j + 1) / (j + 1)
        # derivative f^(m)(x) = x^(-1-m) * sum_i c[i] L^i
        c = [0] * j + [1]
        last = mpmath.mpf(0)
        for m in range(1, 2 * K):
            a = m  # current power of 1/x before differentiating is x^-(m)
            new = [0] * (j + 1)
            for i, ci in enumerate(c):
                if ci:
                    new[i] += -a * ci
                    if i:
                        new[i - 1] += i * ci
            c = new
            if m % 2 == 1:
                q = (m + 1) // 2
                deriv = poly_eval(c, LN) / mpmath.mpf(N) ** (m + 1)
                last = mpmath.bernoulli(2 * q) / math.factorial(2 * q) * deriv
                acc -= last
        return acc, abs(last)


@lru_cache(maxsize=None)
def zeta_laurent(order: int, precision: int = 50) -> ZetaLaurent:
    if order < 1 or order > 8:
        raise UsageError(f"Laurent order must lie in [1, 8], got {order}", "order")
    if precision < MIN_DIGITS:
        raise UsageError(f"precision must be >= {MIN_DIGITS} digits", "precision")
    if precision > 400:
        raise RangeError("Euler-Maclaurin set-up supports at most 400 digits", "precision")
    work = precision + 15
    N = max(100, 2 * precision)
    K = 30 + precision // 4
    gammas = []
    for j in range(order):
        g, err = _stieltjes_em(j, work, N, K)
        if err > mpmath.mpf(10) ** (-(precision + 3)):
            raise RangeError(f"gamma_{j} not resolved to {precision} digits", "precision")
        gammas.append(g)
    return ZetaLaurent(order, tuple(gammas), precision)


# -- residue polynomial --------------------------------------------------

def residue_main_poly(k: int, zl: ZetaLaurent) -> MainTermPoly:
    if k < 1:
        raise UsageError("k must be >= 1", "k")
    if zl.order < k - 1 or zl.order < 1:
        raise UsageError(f"Laurent order {zl.order} too small for k={k}", "order")
    with mpmath.workdps(zl.precision + 10):
        # (s-1) zeta(s) = 1 + sum_j c_j e^(j+1)
        h = [mpmath.mpf(1)] + list(zl.coefficients())[: k - 1]
        hk = series_pow(h, k, k)
        inv = [mpmath.mpf((-1) ** i) for i in range(k)]  # 1/s = 1/(1+e)
        g = series_mul(hk, inv, k)
        coeffs = tuple(g[k - 1 - j] / math.factorial(j) for j in range(k))
    return MainTermPoly(k, coeffs)


def eval_Mk(p: MainTermPoly, x):
    x = mpmath.mpf(x)
    if x < 1:
        raise RangeError(f"x={x} < 1", "x")
    return x * p(mpmath.log(x))


def delta_k_eval(table, p: MainTermPoly, x):
    if table.k != p.k:
        raise UsageError("tau table and main term built for different k", "k")
    if x > table.limit:
        raise RangeError(f"x={x} beyond tau table limit {table.limit}", "x")
    with mpmath.workdps(max(MIN_DIGITS, mpmath.mp.dps)):
        return mpmath.mpf(summatory(table, x)) - eval_Mk(p, x)


# -- product of shifted residue polynomials ------------------------------

def expand_main_product(k: int, t: int, zl: ZetaLaurent, r=None) -> LogProductExpansion:
    """C_l with prod_{j<=t} P_{k-1}(L - lambda_j) = sum_l C_l(lambda) L^l."""
    if t < 0:
        raise UsageError("t must be >= 0", "t")
    a = residue_main_poly(k, zl).coeffs
    with mpmath.workdps(zl.precision + 10):
        # one factor: {(i, m): coeff of L^i lambda^m}
        one = {}
        for j, aj in enumerate(a):
            for i in range(j + 1):
                key = (i, j - i)
                one[key] = one.get(key, 0) + aj * math.comb(j, i) * (-1) ** (j - i)
        prod = {(0, ()): mpmath.mpf(1)}
        for _ in range(t):
            new = {}
            for (i, mono), c in prod.items():
                for (i2, m2), c2 in one.items():
                    key = (i + i2, mono + (m2,))
                    new[key] = new.get(key, 0) + c * c2
            prod = new
        deg = t * (k - 1)
        coeffs = [dict() for _ in range(deg + 1)]
        for (i, mono), c in prod.items():
            if c:
                coeffs[i][mono] = c
    return LogProductExpansion(k, t, tuple(coeffs), r)


# -- multivariable constants ---------------------------------------------

def _shell_tail(shells):
    """Geometric extrapolation of the beyond-X contribution from dyadic shells."""
    s1, s2 = shells
    if s1 == 0:
        return mpmath.mpf(0)
    rho = s1 / s2 if s2 else mpmath.mpf("0.5")
    rho = min(max(rho, mpmath.mpf("0.05")), mpmath.mpf("0.95"))
    return s1 * rho / (1 - rho)


def d_coefficients(r, k, X, lct, sieve, zl, budget=DEFAULT_SUPPORT_BUDGET) -> MultiMainTerm:
    """d_l summed directly over the kernel support with all m_j <= X.

    The reported tail extrapolates the absolute contributions of the two
    outermost dyadic shells in max_j m_j.  It is a heuristic, not a bound.
    """
    if X > sieve.limit:
        raise RangeError(f"X={X} beyond sieve limit {sieve.limit}", "X")
    if lct.r != r or lct.k != k:
        raise UsageError("local coefficient table does not match (r, k)", "lct")
    exp = expand_main_product(k, r, zl, r)
    deg = r * (k - 1)
    with mpmath.workdps(zl.precision + 10):
        d = [mpmath.mpf(0)] * (deg + 1)
        shell = [[mpmath.mpf(0)] * (deg + 1) for _ in range(2)]
        logs = {}
        for m, fv in enumerate_support(X, r, k, sieve, lct, budget):
            lam = []
            for mj in m:
                if mj not in logs:
                    logs[mj] = mpmath.log(mj)
                lam.append(logs[mj])
            w = mpmath.mpf(fv) / mpmath.fprod(m)
            top = max(m)
            which = 0 if 2 * top > X else (1 if 4 * top > X else None)
            for l in range(deg + 1):
                v = w * exp.C(l, lam)
                d[l] += v
                if which is not None:
                    shell[which][l] += abs(v)
        tail = max(_shell_tail((shell[0][l], shell[1][l])) for l in range(deg + 1))
        d = tuple(+v for v in d)
    return MultiMainTerm(r, k, d, int(X), +tail, "direct", zl.precision)


def d_coefficients_euler(r, k, zl, lct, P0=DEFAULT_P0, tail_degree=DEFAULT_TAIL_DEGREE) -> MultiMainTerm:
    """d_l from the Taylor coefficients of F at (1, ..., 1).

    M_{r,k}(x)/x^r = sum_alpha F_alpha prod_j P^(alpha_j)(log x), where
    P^(a) is the a-th derivative of P_{k-1}.  The truncation error is set
    by the working precision, not by a support cutoff.
    """
    if lct.r != r or lct.k != k:
        raise UsageError("local coefficient table does not match (r, k)", "lct")
    dps = zl.precision
    p = residue_main_poly(k, zl)
    with mpmath.workdps(dps + 10):
        derivs = [list(p.coeffs)]
        for _ in range(k - 1):
            derivs.append(poly_derivative(derivs[-1]))
        if r == 1:
            F = {(a,): mpmath.mpf(1 if a == 0 else 0) for a in range(k)}
        else:
            F = taylor_coefficients_F(lct, k - 1, 1, P0, tail_degree, dps)
        deg = r * (k - 1)
        d = [mpmath.mpf(0)] * (deg + 1)
        for alpha, Fa in F.items():
            poly = [mpmath.mpf(1)]
            for a in alpha:
                poly = series_mul(poly, derivs[a], deg + 1)
            for l, c in enumerate(poly):
                d[l] += Fa * c
        d = tuple(+v for v in d)
    tail = mpmath.mpf(10) ** (-(dps - 10))
    return MultiMainTerm(r, k, d, 0, tail, "euler", dps, {"P0": P0, "tail_degree": tail_degree})


def eval_Mrk(mm: MultiMainTerm, x):
    x = mpmath.mpf(x)
    if x < 1:
        raise RangeError(f"x={x} < 1", "x")
    return x**mm.r * poly_eval(mm.d, mpmath.log(x))


def export_d_json(mm: MultiMainTerm, path=None, digits=None):
    digits = digits or mm.precision
    doc = {
        "r": mm.r,
        "k": mm.k,
        "X": mm.truncation_limit,
        "d": [mpmath.nstr(v, digits) for v in mm.d],
        "tail_estimate": mpmath.nstr(mpmath.mpf(mm.tail_estimate), 6),
        "precision_digits": mm.precision,
    }
    text = json.dumps(doc, indent=2, sort_keys=False) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def load_d_json(text):
    doc = json.loads(text)
    return MultiMainTerm(
        int(doc["r"]),
        int(doc["k"]),
        tuple(mpmath.mpf(v) for v in doc["d"]),
        int(doc["X"]),
        mpmath.mpf(doc["tail_estimate"]),
        "loaded",
        int(doc["precision_digits"]),
    )
