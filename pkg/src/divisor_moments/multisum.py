"""Exact r-variable divisor sums S(n) = sum_{n_1..n_r <= n} tau_k(n_1...n_r) and their error term."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .errors import BudgetExceeded, OverflowDetected, RangeError, UsageError
from .mainterm import MIN_DIGITS, delta_k_eval, eval_Mk, eval_Mrk
from .sieve import INT64_MAX, factor_exponents, summatory, tau_k_of_factored

BRUTE_BUDGET = 50_000_000


@dataclass(frozen=True)
class MultiSumTable:
    r: int
    k: int
    limit: int
    S: np.ndarray = field(repr=False)  # object dtype, S[0] = 0

    def __getitem__(self, n):
        return int(self.S[n])


def _merged_tau(tup, facs, k):
    merged = {}
    for n in tup:
        for p, e in facs[n].items():
            merged[p] = merged.get(p, 0) + e
    return tau_k_of_factored(merged, k, checked=False)


def multisum_brute(x, r, k, sieve, budget=BRUTE_BUDGET) -> int:
    """Direct sum over all r-tuples; tau_k of the product from merged factorizations."""
    x = int(x)
    if x < 1:
        return 0
    if x > sieve.limit:
        raise RangeError(f"x={x} beyond sieve limit {sieve.limit}", "x")
    if x**r > budget:
        raise BudgetExceeded(f"{x}^{r} tuples exceed brute-force budget {budget}", "x")
    facs = [None] + [factor_exponents(n, sieve) for n in range(1, x + 1)]
    return sum(_merged_tau(t, facs, k) for t in itertools.product(range(1, x + 1), repeat=r))


def multisum_brute_table(T, r, k, sieve, budget=BRUTE_BUDGET):
    """[S(0), S(1), ..., S(T)] by brute force, adding the tuples whose maximum is n."""
    T = int(T)
    if T > sieve.limit:
        raise RangeError(f"T={T} beyond sieve limit {sieve.limit}", "T")
    if T**r > budget:
        raise BudgetExceeded(f"{T}^{r} tuples exceed brute-force budget {budget}", "T")
    facs = [None] + [factor_exponents(n, sieve) for n in range(1, T + 1)]
    out = [0] * (T + 1)
    for n in range(1, T + 1):
        add = 0
        for t in itertools.product(range(1, n + 1), repeat=r):
            if max(t) == n:
                add += _merged_tau(t, facs, k)
        out[n] = out[n - 1] + add
    return out


def multisum_fast(n, tau, support) -> int:
    """S(n) = sum over the kernel support of f(m) prod_j D_k(n // m_j)."""
    n = int(n)
    if n < 1:
        return 0
    if n > tau.limit:
        raise RangeError(f"n={n} beyond tau table limit {tau.limit}", "n")
    ms, fs = support
    prefix = tau.prefix
    total = 0
    for m, fv in zip(ms.tolist(), fs.tolist()):
        if max(m) > n:
            continue
        total += fv * math.prod(int(prefix[n // mj]) for mj in m)
    return total


def build_multisum_table(T, tau, support, r=None) -> MultiSumTable:
    """S(1..T) via increments.

    S(n) - S(n-1) = sum_m f(m) [prod_j D(n // m_j) - prod_j D((n-1) // m_j)],
    and only n divisible by some m_j contribute for a given m.  The cost
    is about sum_m sum_j T/m_j instead of |support| * T.
    """
    ms, fs = support
    if r is None:
        r = ms.shape[1]
    T = int(T)
    if T > tau.limit:
        raise RangeError(f"T={T} beyond tau table limit {tau.limit}", "T")
    D = tau.prefix_int64()
    top = int(D[T])
    fmax = max((abs(int(v)) for v in fs.tolist()), default=1)
    # int64 path only when every single product fits; a float shadow of the
    # absolute increments then guards the accumulator itself
    wide = top**r * fmax * 2 > INT64_MAX
    g = np.zeros(T + 1, dtype=object if wide else np.int64)
    shadow = np.zeros(T + 1)
    for m, fv in zip(ms.tolist(), fs.tolist()):
        if max(m) > T:
            continue
        ns = np.unique(np.concatenate([np.arange(mj, T + 1, mj) for mj in set(m)]))
        if wide:
            now = np.ones(len(ns), dtype=object)
            before = np.ones(len(ns), dtype=object)
            for mj in m:
                now = now * D[ns // mj].astype(object)
                before = before * D[(ns - 1) // mj].astype(object)
            g[ns] = g[ns] + int(fv) * (now - before)
        else:
            now = np.ones(len(ns), dtype=np.int64)
            before = np.ones(len(ns), dtype=np.int64)
            for mj in m:
                now *= D[ns // mj]
                before *= D[(ns - 1) // mj]
            inc = int(fv) * (now - before)
            g[ns] += inc
            shadow[ns] += np.abs(inc.astype(float))
    if not wide and shadow.max(initial=0.0) > 2.0**62:
        raise OverflowDetected("multisum increments exceed 64-bit range", "T")
    S = np.empty(T + 1, dtype=object)
    acc = 0
    for n, v in enumerate(g.tolist()):
        acc += v
        S[n] = acc
    return MultiSumTable(int(r), tau.k, T, S)


def delta_rk_eval(x, table: MultiSumTable, mm):
    x = mpmath.mpf(x)
    if x < 1 or x >= table.limit + 1:
        raise RangeError(f"x={x} outside [1, {table.limit + 1})", "x")
    if mm.r != table.r or mm.k != table.k:
        raise UsageError("main term does not match the table (r, k)", "mm")
    with mpmath.workdps(max(MIN_DIGITS, mpmath.mp.dps)):
        n = int(mpmath.floor(x))
        return mpmath.mpf(table[n]) - eval_Mrk(mm, x)


def delta_star_eval(x, tau, poly, support, y=None):
    """r sum_{m_j <= y} f(m) prod_{j<r} M_k(x/m_j) * Delta_k(x/m_r), with y defaulting to x."""
    ms, fs = support
    x = mpmath.mpf(x)
    if x > tau.limit:
        raise RangeError(f"x={x} beyond tau table limit {tau.limit}", "x")
    y = x if y is None else mpmath.mpf(y)
    r = ms.shape[1]
    with mpmath.workdps(max(MIN_DIGITS, mpmath.mp.dps)):
        Mcache, Dcache = {}, {}
        acc = mpmath.mpf(0)
        for m, fv in zip(ms.tolist(), fs.tolist()):
            if max(m) > y:
                continue
            term = mpmath.mpf(fv)
            for mj in m[:-1]:
                if mj not in Mcache:
                    Mcache[mj] = eval_Mk(poly, x / mj)
                term *= Mcache[mj]
            mr = m[-1]
            if mr not in Dcache:
                Dcache[mr] = delta_k_eval(tau, poly, x / mr)
            acc += term * Dcache[mr]
        return r * acc


def multisum_csv(table: MultiSumTable, mm, digits=25, rows=None):
    """CSV text with columns n, S[n], Delta(n + 0.5)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "S", "delta_mid"])
    rng = range(1, table.limit + 1) if rows is None else rows
    for n in rng:
        d = delta_rk_eval(mpmath.mpf(n) + mpmath.mpf("0.5"), table, mm)
        w.writerow([n, table[n], mpmath.nstr(d, digits)])
    return buf.getvalue()
