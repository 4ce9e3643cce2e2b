"""Smallest-prime-factor sieve, factorization and tau_k tables.

Everything downstream reads tau_k values and the exact summatory
function D_k(n) from a :class:`TauTable`.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import mpmath
import numpy as np

from .errors import AllocationError, OverflowDetected, RangeError, UsageError

INT64_MAX = np.iinfo(np.int64).max

_CACHE_MAGIC = b"DMT1"


@dataclass(frozen=True)
class FactorSieve:
    limit: int
    spf: np.ndarray = field(repr=False)

    def is_prime(self, n):
        return 2 <= n <= self.limit and int(self.spf[n]) == n

    def primes(self, upto=None):
        upto = self.limit if upto is None else min(upto, self.limit)
        idx = np.arange(2, upto + 1)
        return idx[self.spf[2 : upto + 1] == idx]


@dataclass(frozen=True)
class FactoredInteger:
    n: int
    factors: tuple  # ((p, e), ...) with p strictly increasing

    def exponents(self):
        return dict(self.factors)


def build_factor_sieve(limit: int) -> FactorSieve:
    """Smallest prime factor for every 2 <= n <= limit."""
    if int(limit) != limit or limit < 2:
        raise UsageError(f"sieve limit must be an integer >= 2, got {limit!r}", "limit")
    limit = int(limit)
    dtype = np.int32 if limit < 2**31 else np.int64
    need = (limit + 1) * np.dtype(dtype).itemsize
    try:
        spf = np.zeros(limit + 1, dtype=dtype)
    except MemoryError:
        raise AllocationError(
            f"cannot allocate smallest-prime-factor table for limit {limit}", need, "limit"
        ) from None
    for p in range(2, math.isqrt(limit) + 1):
        if spf[p] == 0:
            spf[p] = p
            block = spf[p * p :: p]
            block[block == 0] = p
    rest = np.flatnonzero(spf == 0)
    spf[rest] = rest.astype(dtype)
    spf[0] = 0
    spf[1] = 1
    spf.setflags(write=False)
    return FactorSieve(limit, spf)


def factorize(n: int, sieve: FactorSieve) -> FactoredInteger:
    if n < 1 or n > sieve.limit:
        raise RangeError(f"n={n} outside [1, {sieve.limit}]", "n")
    n = int(n)
    m = n
    out = []
    spf = sieve.spf
    while m > 1:
        p = int(spf[m])
        e = 0
        while m % p == 0:
            m //= p
            e += 1
        out.append((p, e))
    return FactoredInteger(n, tuple(out))


def factor_exponents(n, sieve):
    """Plain ``{p: e}`` dict; the hot-loop variant of :func:`factorize`."""
    m = int(n)
    out = {}
    spf = sieve.spf
    while m > 1:
        p = int(spf[m])
        m //= p
        out[p] = out.get(p, 0) + 1
    return out


def tau_k_prime_power(e, k):
    return math.comb(e + k - 1, k - 1)


def tau_k_of_factored(f, k: int, checked: bool = True) -> int:
    """tau_k(n) = prod binom(e + k - 1, k - 1) over the prime powers of n.

    ``f`` is a FactoredInteger, a ``{p: e}`` dict or an iterable of
    ``(p, e)`` pairs.  With ``checked`` the result must fit a signed
    64-bit integer.
    """
    if k < 2:
        raise UsageError(f"k must be >= 2, got {k}", "k")
    if isinstance(f, FactoredInteger):
        pairs = f.factors
    elif isinstance(f, dict):
        pairs = f.items()
    else:
        pairs = f
    val = 1
    for _, e in pairs:
        val *= math.comb(e + k - 1, k - 1)
    if checked and val > INT64_MAX:
        raise OverflowDetected(f"tau_{k} value {val} exceeds 64-bit range", "k")
    return val


@dataclass(frozen=True)
class TauTable:
    k: int
    limit: int
    tau: np.ndarray = field(repr=False)  # int64, tau[0] = 0
    prefix: np.ndarray = field(repr=False)  # object dtype, exact Python ints

    def __post_init__(self):
        self.tau.setflags(write=False)

    def prefix_int64(self):
        """Prefix sums as int64 for vectorized lookups; checked."""
        top = int(self.prefix[-1])
        if top > INT64_MAX:
            raise OverflowDetected(f"D_{self.k}({self.limit}) = {top} exceeds 64-bit range", "limit")
        return self.prefix.astype(np.int64)


def _exact_prefix(tau):
    out = np.empty(len(tau), dtype=object)
    acc = 0
    for i, t in enumerate(tau.tolist()):
        acc += t
        out[i] = acc
    return out


def build_tau_table(limit: int, k: int, sieve: FactorSieve) -> TauTable:
    if k < 2:
        raise UsageError(f"k must be >= 2, got {k}", "k")
    if limit < 1:
        raise UsageError(f"tau table limit must be >= 1, got {limit}", "limit")
    if limit > sieve.limit:
        raise RangeError(f"tau table limit {limit} exceeds sieve limit {sieve.limit}", "limit")
    limit = int(limit)
    try:
        tau = np.ones(limit + 1, dtype=np.int64)
    except MemoryError:
        raise AllocationError("cannot allocate tau table", 8 * (limit + 1), "limit") from None
    tau[0] = 0
    maxe = max(1, int(math.log2(limit)) + 1)
    comb = np.array([math.comb(e + k - 1, k - 1) for e in range(maxe + 1)], dtype=object)
    if comb[-1] > INT64_MAX:
        comb_i64 = None
    else:
        comb_i64 = comb.astype(np.int64)
    small = math.isqrt(limit)
    for p in sieve.primes(limit).tolist():
        if p > small:
            _checked_scale(tau, slice(p, None, p), k)
            continue
        idx = np.arange(p, limit + 1, p)
        m = idx // p
        v = np.ones(len(idx), dtype=np.int64)
        while True:
            mask = m % p == 0
            if not mask.any():
                break
            v[mask] += 1
            m[mask] //= p
        if comb_i64 is None:
            raise OverflowDetected(f"tau_{k} prime-power values exceed 64-bit range", "k")
        _checked_scale(tau, idx, comb_i64[v])
    return TauTable(k, limit, tau, _exact_prefix(tau))


def _checked_scale(tau, where, factor):
    cur = tau[where]
    lim = INT64_MAX // np.asarray(factor, dtype=np.int64)
    if np.any(cur > lim):
        raise OverflowDetected("tau_k value exceeds 64-bit range", "k")
    tau[where] = cur * factor


def _floor_int(y):
    if isinstance(y, (int, np.integer)):
        return int(y)
    if isinstance(y, float):
        return math.floor(y)
    return int(mpmath.floor(y))


def summatory(table: TauTable, y) -> int:
    """D_k(floor(y)) exactly; 0 for y < 1."""
    if y < 1:
        return 0
    n = _floor_int(y)
    if n > table.limit:
        raise RangeError(f"y={y} beyond tau table limit {table.limit}", "y")
    return int(table.prefix[n])


def save_tau_table(table: TauTable, path) -> None:
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(_CACHE_MAGIC)
        fh.write(struct.pack("<qq", table.k, table.limit))
        fh.write(np.ascontiguousarray(table.tau[1:], dtype="<i8").tobytes())


def load_tau_table(path) -> TauTable:
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(4)
        if magic != _CACHE_MAGIC:
            raise UsageError(f"{path} is not a tau table cache (bad magic {magic!r})", "path")
        k, limit = struct.unpack("<qq", fh.read(16))
        raw = np.frombuffer(fh.read(), dtype="<i8")
    if len(raw) != limit:
        raise UsageError(f"{path}: expected {limit} tau values, found {len(raw)}", "path")
    tau = np.empty(limit + 1, dtype=np.int64)
    tau[0] = 0
    tau[1:] = raw
    return TauTable(int(k), int(limit), tau, _exact_prefix(tau))
