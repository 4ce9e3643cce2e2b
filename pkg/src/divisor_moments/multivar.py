"""The multiplicative kernel f_{r,k} relating tau_k(n_1...n_r) to products of tau_k.

f is determined by its prime-independent local values c(nu); those come
from expanding  prod_j (1 - u_j)^k * sum_nu binom(|nu|+k-1, k-1) u^nu.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import mpmath
import numpy as np

from .errors import BudgetExceeded, RangeError, UsageError
from .powerseries import dense_box_mul
from .sieve import factor_exponents, tau_k_of_factored

DEFAULT_MAX_EXP = {2: 40, 3: 20}
DEFAULT_BOX_BUDGET = 2_000_000
DEFAULT_SUPPORT_BUDGET = 20_000_000


@dataclass(frozen=True)
class LocalCoeffTable:
    r: int
    k: int
    max_exp: int
    c: dict = field(repr=False)  # exponent tuple -> int

    def __call__(self, nu):
        try:
            return self.c[tuple(nu)]
        except KeyError:
            if any(v > self.max_exp for v in nu):
                raise RangeError(
                    f"exponent tuple {tuple(nu)} exceeds max_exp={self.max_exp}", "max_exp"
                ) from None
            raise

    def nonzero(self):
        return {nu: v for nu, v in self.c.items() if v}


def lemma_identity_eval(r, k, t):
    """|LHS - RHS| for the subset expansion of the (1 - t_j)^k combination.

    LHS = -(r-1) prod_j (1-t_j)^k + sum_j prod_{i != j} (1-t_i)^k.
    RHS = 1 - sum_{|A| >= 2} (|A| - 1) prod_{i in A} sum_{b=1}^{k} (-1)^b binom(k,b) t_i^b,
    written out monomial by monomial.  No monomial in a single t_j survives.
    """
    t = [mpmath.mpmathify(v) for v in t]
    if len(t) != r:
        raise UsageError(f"expected {r} arguments, got {len(t)}", "t")
    fac = [(1 - v) ** k for v in t]
    lhs = -(r - 1) * mpmath.fprod(fac)
    for j in range(r):
        lhs += mpmath.fprod(fac[i] for i in range(r) if i != j)
    bterms = [math.comb(k, b) * (-1) ** b for b in range(k + 1)]
    rhs = mpmath.mpf(1)
    for size in range(2, r + 1):
        for subset in itertools.combinations(range(r), size):
            for bs in itertools.product(range(1, k + 1), repeat=size):
                mono = mpmath.fprod(bterms[b] * t[a] ** b for a, b in zip(subset, bs))
                rhs -= (size - 1) * mono
    return abs(lhs - rhs)


def local_coefficients(r, k, max_exp, budget=DEFAULT_BOX_BUDGET) -> LocalCoeffTable:
    if r < 1 or k < 2:
        raise UsageError(f"need r >= 1 and k >= 2 (got r={r}, k={k})", "r")
    size = (max_exp + 1) ** r
    if size > budget:
        raise BudgetExceeded(
            f"local coefficient box has {size} entries, budget {budget}", "max_exp"
        )
    shape = (max_exp + 1,) * r
    # sum_nu binom(|nu|+k-1, k-1) u^nu
    grid = np.indices(shape).sum(axis=0)
    row = [math.comb(n + k - 1, k - 1) for n in range(r * max_exp + 1)]
    series = np.empty(shape, dtype=object)
    for idx in np.ndindex(shape):
        series[idx] = row[grid[idx]]
    # prod_j (1 - u_j)^k, exact
    one = np.array([(-1) ** b * math.comb(k, b) for b in range(k + 1)], dtype=object)
    lead = np.zeros((k + 1,) * r, dtype=object)
    for idx in np.ndindex(lead.shape):
        lead[idx] = math.prod(one[i] for i in idx)
    out = dense_box_mul(series, lead)
    c = {idx: int(out[idx]) for idx in np.ndindex(shape)}
    return LocalCoeffTable(r, k, max_exp, c)


def local_coefficient_closed(nu, k):
    """c(nu) by direct inclusion over a <= nu, a_j <= k; used as an oracle."""
    total = sum(nu)
    acc = 0
    for a in itertools.product(*(range(min(v, k) + 1) for v in nu)):
        w = 1
        for aj in a:
            w *= (-1) ** aj * math.comb(k, aj)
        acc += w * math.comb(total - sum(a) + k - 1, k - 1)
    return acc


def save_local_coefficients(lct: LocalCoeffTable, path):
    doc = {
        "r": lct.r,
        "k": lct.k,
        "max_exp": lct.max_exp,
        "entries": [[list(nu), v] for nu, v in sorted(lct.c.items())],
    }
    Path(path).write_text(json.dumps(doc, separators=(",", ":")))


def load_local_coefficients(path) -> LocalCoeffTable:
    doc = json.loads(Path(path).read_text())
    c = {tuple(nu): int(v) for nu, v in doc["entries"]}
    return LocalCoeffTable(int(doc["r"]), int(doc["k"]), int(doc["max_exp"]), c)


def cached_local_coefficients(r, k, max_exp=None, cache_dir=None):
    """Load from ``cache_dir`` when present, otherwise build and store."""
    if max_exp is None:
        max_exp = DEFAULT_MAX_EXP.get(r, 12)
    if cache_dir is None:
        return local_coefficients(r, k, max_exp)
    path = Path(cache_dir) / f"lct_r{r}_k{k}_e{max_exp}.json"
    if path.exists():
        return load_local_coefficients(path)
    lct = local_coefficients(r, k, max_exp)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_local_coefficients(lct, path)
    return lct


def f_eval(m, sieve, lct: LocalCoeffTable) -> int:
    r = lct.r
    if len(m) != r:
        raise UsageError(f"expected {r} arguments, got {len(m)}", "m")
    facs = []
    for v in m:
        if v < 1 or v > sieve.limit:
            raise RangeError(f"argument {v} outside [1, {sieve.limit}]", "m")
        facs.append(factor_exponents(v, sieve))
    primes = set().union(*facs)
    val = 1
    for p in primes:
        nu = tuple(f.get(p, 0) for f in facs)
        val *= lct(nu)
        if not val:
            return 0
    return val


def enumerate_support(limit, r, k, sieve, lct: LocalCoeffTable, budget=DEFAULT_SUPPORT_BUDGET):
    """Yield (m, f(m)) for every r-tuple with all m_j <= limit and f(m) != 0.

    Depth-first over primes in increasing order.  Each prime must divide at
    least two coordinates, so the search stops once p times the second
    smallest coordinate exceeds the limit.  Output order is deterministic.
    """
    if limit > sieve.limit:
        raise RangeError(f"support limit {limit} exceeds sieve limit {sieve.limit}", "limit")
    if lct.r != r or lct.k != k:
        raise UsageError("local coefficient table does not match (r, k)", "lct")
    limit = int(limit)
    primes = sieve.primes(max(2, limit)).tolist() if limit >= 2 else []
    # exponent patterns with at least two nonzero entries and c != 0
    patterns = sorted(
        (nu, v) for nu, v in lct.c.items() if v and sum(1 for e in nu if e) >= 2
    )
    count = 0

    def rec(start, m, val):
        nonlocal count
        count += 1
        if count > budget:
            raise BudgetExceeded(f"support enumeration exceeded {budget} tuples", "limit")
        yield tuple(m), val
        second = sorted(m)[1]
        for i in range(start, len(primes)):
            p = primes[i]
            if p * second > limit:
                break
            for nu, c in patterns:
                new = list(m)
                ok = True
                for j, e in enumerate(nu):
                    if e:
                        new[j] *= p**e
                        if new[j] > limit:
                            ok = False
                            break
                if ok:
                    yield from rec(i + 1, new, val * c)

    if r == 1:
        yield (1,), 1
        return
    yield from rec(0, [1] * r, 1)


def support_list(limit, r, k, sieve, lct, budget=DEFAULT_SUPPORT_BUDGET):
    """Support as (int64 array of tuples, object array of f values), sorted."""
    items = sorted(enumerate_support(limit, r, k, sieve, lct, budget))
    ms = np.array([m for m, _ in items], dtype=np.int64).reshape(-1, r)
    fs = np.array([v for _, v in items], dtype=object)
    return ms, fs


def _divisors(n, sieve):
    divs = [1]
    for p, e in factor_exponents(n, sieve).items():
        divs = [d * p**i for d in divs for i in range(e + 1)]
    return sorted(divs)


def convolution_check(n, k, sieve, lct, tau) -> bool:
    """Check tau_k(prod n_j) = sum over m_j | n_j of f(m) prod tau_k(n_j / m_j)."""
    r = lct.r
    if len(n) != r:
        raise UsageError(f"expected {r} arguments, got {len(n)}", "n")
    lim = min(sieve.limit, tau.limit)
    if any(v < 1 or v > lim for v in n):
        raise RangeError(f"arguments must lie in [1, {lim}]", "n")
    merged = {}
    for v in n:
        for p, e in factor_exponents(v, sieve).items():
            merged[p] = merged.get(p, 0) + e
    lhs = tau_k_of_factored(merged, k, checked=False)
    rhs = 0
    tv = tau.tau
    for m in itertools.product(*(_divisors(v, sieve) for v in n)):
        fv = f_eval(m, sieve, lct)
        if fv:
            rhs += fv * math.prod(int(tv[v // d]) for v, d in zip(n, m))
    return lhs == rhs


def convolution_sweep(box, r, k, sieve, lct, tau, tau_prod):
    """Check the identity on the whole box n_j <= box at once.

    The divisor side is accumulated by scattering each support element
    over its multiples; the product side reads ``tau_prod``, a tau_k
    table reaching box**r.  Returns (all_equal, number_of_mismatches).
    """
    if tau.limit < box or tau_prod.limit < box**r:
        raise RangeError("tau tables too short for the requested box", "box")
    if tau.k != k or tau_prod.k != k:
        raise UsageError("tau tables built for a different k", "k")
    ms, fs = support_list(box, r, k, sieve, lct)
    shape = (box + 1,) * r
    rhs = np.zeros(shape, dtype=object)
    tv = [int(v) for v in tau.tau[: box + 1]]
    tv = np.array(tv, dtype=object)
    for m, fv in zip(ms.tolist(), fs.tolist()):
        parts = [tv[1 : box // mj + 1] for mj in m]
        block = parts[0]
        for p in parts[1:]:
            block = np.multiply.outer(block, p)
        sl = tuple(slice(mj, None, mj) for mj in m)
        rhs[sl] = rhs[sl] + fv * block
    grids = np.meshgrid(*([np.arange(1, box + 1, dtype=np.int64)] * r), indexing="ij")
    prod = grids[0]
    for g in grids[1:]:
        prod = prod * g
    lhs = tau_prod.tau[prod]
    inner = rhs[(slice(1, None),) * r].astype(np.int64)
    bad = int(np.count_nonzero(lhs != inner))
    return bad == 0, bad


def dirichlet_factorization_residual(s, X, tau, sieve, lct):
    """|sum_{n_j <= X} tau_k(prod n_j) prod n_j^-s_j - prod zeta^k(s_j) * F_X(s)|.

    F_X is the Dirichlet series of f over the support with all m_j <= X;
    zeta is evaluated in full.
    """
    r, k = lct.r, lct.k
    if len(s) != r:
        raise UsageError(f"expected {r} exponents", "s")
    if X > sieve.limit or X > tau.limit:
        raise RangeError(f"X={X} beyond table limits", "X")
    s = [mpmath.mpmathify(v) for v in s]
    X = int(X)
    # left side: merge factorizations tuple by tuple
    facs = [None] + [factor_exponents(n, sieve) for n in range(1, X + 1)]
    powers = [[mpmath.mpf(0)] + [mpmath.mpf(n) ** (-sj) for n in range(1, X + 1)] for sj in s]
    lhs = mpmath.mpf(0)
    for tup in itertools.product(range(1, X + 1), repeat=r):
        merged = {}
        for n in tup:
            for p, e in facs[n].items():
                merged[p] = merged.get(p, 0) + e
        w = mpmath.fprod(powers[j][n] for j, n in enumerate(tup))
        lhs += tau_k_of_factored(merged, k, checked=False) * w
    fx = mpmath.mpf(0)
    for m, fv in enumerate_support(X, r, k, sieve, lct):
        fx += fv * mpmath.fprod(powers[j][mj] for j, mj in enumerate(m))
    rhs = mpmath.fprod(mpmath.zeta(sj) ** k for sj in s) * fx
    return abs(lhs - rhs)
