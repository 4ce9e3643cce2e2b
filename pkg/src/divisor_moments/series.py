"""Singular series behind the mean-square main terms.

The constrained sum over (M1, M2, n1, n2) with m_r n2 = m_2r n1 is
reparametrized as m_r = q a, m_2r = q b, n1 = t a, n2 = t b with
gcd(a, b) = 1, which splits it into a matrix product over the last
coordinates of M1 and M2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath
import numpy as np

from .errors import MissingConstants, RangeError, UsageError
from .euler import tau3_square_zeta
from .mainterm import expand_main_product
from .multivar import support_list
from .powerseries import poly_eval

L_DIGITS = 40


@dataclass(frozen=True)
class SeriesValue:
    value: object
    truncation: object
    tail_estimate: object
    extras: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class LPolynomial:
    r: int
    coeffs: tuple

    def __call__(self, u):
        return poly_eval(self.coeffs, u)


# -- Tong's constant -----------------------------------------------------

def _tong_partial(N, tau):
    with mpmath.workdps(40):
        t = tau.tau[1 : N + 1].astype(float)
        n = np.arange(1, N + 1, dtype=float)
        terms = t * t * n ** (-4.0 / 3.0)
        return mpmath.mpf(math.fsum(terms.tolist()))


@lru_cache(maxsize=None)
def tong_constant_full(dps=40):
    """(1 / (10 pi^2)) sum_n tau_3(n)^2 n^(-4/3), via the Euler product."""
    with mpmath.workdps(dps + 5):
        return tau3_square_zeta(mpmath.mpf(4) / 3, dps=dps) / (10 * mpmath.pi**2)


def tong_constant(N, tau, tail="euler"):
    """Partial Tong constant (1/(10 pi^2)) sum_{n<=N} tau_3(n)^2 / n^(4/3).

    ``tail="euler"`` reports the exact remainder against the complete
    Euler-product value; ``tail="fit"`` fits C N^(-1/3+0.05) to the last
    decade of terms.  Both are returned, the chosen one as tail_estimate.
    """
    if N > tau.limit:
        raise RangeError(f"N={N} beyond tau table limit {tau.limit}", "N")
    if tau.k != 3:
        raise UsageError("Tong's constant uses tau_3", "k")
    N = int(N)
    with mpmath.workdps(40):
        scale = 1 / (10 * mpmath.pi**2)
        part = _tong_partial(N, tau)
        val = part * scale
        e = mpmath.mpf(1) / 3 - mpmath.mpf("0.05")
        if N >= 10:
            decade = part - _tong_partial(N // 10, tau)
            lo = mpmath.mpf(N // 10)
            C = decade / (lo ** (-e) - mpmath.mpf(N) ** (-e))
            fit = C * mpmath.mpf(N) ** (-e) * scale
        else:
            fit = mpmath.inf
        full = tong_constant_full()
        exact = full - val
        chosen = exact if tail == "euler" else fit
    return SeriesValue(val, N, chosen, {"fit_tail": fit, "euler_tail": exact, "full": full})


# -- resonance sum -------------------------------------------------------

def resonance_sum(a, b, N1, N2, N):
    """sum_{N1 < n1 <= 2N1} sum_{N2 < n2 <= 2N2, a n1 != b n2} 1/|a n1 - b n2|."""
    if not (1 <= a <= N and 1 <= b <= N and 1 <= N1 <= N and 1 <= N2 <= N):
        raise RangeError("parameters must satisfy a, b, N1, N2 in [1, N]", "N")
    n1 = np.arange(N1 + 1, 2 * N1 + 1, dtype=np.int64)
    n2 = np.arange(N2 + 1, 2 * N2 + 1, dtype=np.int64)
    diff = np.abs(a * n1[:, None] - b * n2[None, :])
    diff = diff[diff != 0].astype(float)
    return math.fsum((1.0 / diff).tolist())


# -- constrained singular series -----------------------------------------

def _pair_sums(xmax, y, w, tau):
    """Nt[a, b] = (ab)^-w sum_{t <= y/max(a,b)} tau_3(ta) tau_3(tb) t^(-2w), gcd(a,b) = 1."""
    out = np.zeros((xmax + 1, xmax + 1))
    tv = tau.tau.astype(float)
    for a in range(1, xmax + 1):
        bs = np.arange(a, xmax + 1, dtype=np.int64)
        bs = bs[(np.gcd(bs, a) == 1) & (bs <= y)]
        if not len(bs):
            continue
        lens = y // bs
        keep = lens > 0
        bs, lens = bs[keep], lens[keep]
        total = int(lens.sum())
        starts = np.concatenate([[0], np.cumsum(lens)[:-1]])
        t = np.arange(total, dtype=np.int64) - np.repeat(starts, lens) + 1
        brep = np.repeat(bs, lens)
        vals = tv[t * a] * tv[t * brep] * t.astype(float) ** (-2 * w)
        sums = np.add.reduceat(vals, starts)
        wts = (a * bs.astype(float)) ** (-w) * sums
        out[a, bs] = wts
        out[bs, a] = wts
    return out


def _last_coordinate_weights(ms, fs, selectors, xmax):
    """A[i][m] = sum over support tuples with last coordinate m of f * g_i / D1."""
    last = ms[:, -1]
    head = ms[:, :-1].astype(float)
    D1 = np.prod(head, axis=1) if head.shape[1] else np.ones(len(ms))
    f = np.array([float(v) for v in fs.tolist()])
    lam = np.log(head).T if head.shape[1] else np.zeros((0, len(ms)))
    rows = []
    for sel in selectors:
        g = sel(lam) if sel is not None else 1.0
        contrib = f * g / D1
        A = np.zeros(xmax + 1)
        np.add.at(A, last, contrib)
        rows.append(A)
    return rows


def _bilinear(Ai, W, Aj, idx):
    a = Ai[idx]
    b = Aj[idx]
    return math.fsum((a[:, None] * W * b[None, :]).ravel().tolist())


def _T_matrix(x, y, s, w, r, sieve, lct, tau, selectors):
    """Matrix of truncated sums for every pair of selectors (upper triangle mirrored)."""
    ms, fs = support_list(x, r, 3, sieve, lct)
    A = _last_coordinate_weights(ms, fs, selectors, x)
    idx = np.flatnonzero(np.any(np.array(A) != 0, axis=0))
    Nt = _pair_sums(x, y, w, tau)
    g = np.gcd.outer(idx, idx)
    W = np.outer(idx.astype(float), idx.astype(float)) ** (-s) * Nt[idx[:, None] // g, idx[None, :] // g]
    n = len(selectors)
    out = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            v = _bilinear(A[i], W, A[j], idx)
            out[i][j] = out[j][i] = v
    return out


def _check_regime(s, w, r, x, y, sieve, tau):
    if not (0 < s < 0.5 < w < 1):
        raise UsageError(f"need 0 < s < 1/2 < w < 1 (got s={s}, w={w})", "s")
    if r < 2:
        raise UsageError("r must be >= 2", "r")
    if x > sieve.limit:
        raise RangeError(f"x={x} beyond sieve limit {sieve.limit}", "x")
    if y > tau.limit:
        raise RangeError(f"y={y} beyond tau table limit {tau.limit}", "y")
    if tau.k != 3:
        raise UsageError("the series uses tau_3", "k")


def _selectors(r, zl, ells):
    if ells is None:
        return [None]
    exp = expand_main_product(3, r - 1, zl, r)
    return [(lambda lam, l=l: exp.C_float(l, lam)) for l in ells]


def _fitted_tails(vals, vx, vy, x, y, s, w):
    """c1 x^-2s + c2 y^(1-2w), constants fitted from the outermost decade."""
    dx = (x / 10) ** (-2 * s) - x ** (-2 * s)
    dy = (y / 10) ** (1 - 2 * w) - y ** (1 - 2 * w)
    n = len(vals)
    tails = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            c1 = abs(vals[i][j] - vx[i][j]) / dx
            c2 = abs(vals[i][j] - vy[i][j]) / dy
            tails[i][j] = c1 * x ** (-2 * s) + c2 * y ** (1 - 2 * w)
    return tails


def _T_with_tails(x, y, s, w, r, sieve, lct, tau, selectors):
    vals = _T_matrix(x, y, s, w, r, sieve, lct, tau, selectors)
    if x >= 10 and y >= 10:
        vx = _T_matrix(x // 10, y, s, w, r, sieve, lct, tau, selectors)
        vy = _T_matrix(x, y // 10, s, w, r, sieve, lct, tau, selectors)
        tails = _fitted_tails(vals, vx, vy, x, y, s, w)
    else:
        tails = [[math.inf] * len(vals) for _ in vals]
    return vals, tails


def truncated_T_grs(x, y, s, w, r, sieve, lct, tau, zl=None, ell=None):
    """Truncated constrained series; ``ell=(l1, l2)`` selects g = C_l1 * C_l2, None gives g = 1."""
    _check_regime(s, w, r, x, y, sieve, tau)
    if ell is None:
        sel = _selectors(r, zl, None)
        vals, tails = _T_with_tails(int(x), int(y), s, w, r, sieve, lct, tau, sel)
        return SeriesValue(mpmath.mpf(vals[0][0]), (x, y), mpmath.mpf(tails[0][0]))
    if zl is None:
        raise UsageError("Laurent data needed for the C_l weights", "zl")
    l1, l2 = ell
    ells = sorted(set([l1, l2]))
    sel = _selectors(r, zl, ells)
    vals, tails = _T_with_tails(int(x), int(y), s, w, r, sieve, lct, tau, sel)
    i, j = ells.index(l1), ells.index(l2)
    return SeriesValue(mpmath.mpf(vals[i][j]), (x, y), mpmath.mpf(tails[i][j]))


@dataclass(frozen=True)
class DConstants:
    r: int
    s: object
    w: object
    x: int
    y: int
    D: tuple  # matrix of mpf
    tails: tuple


def D_matrix(r, x, y, sieve, lct, tau, zl) -> DConstants:
    """All D_{r,3,l1,l2} for 0 <= l1, l2 <= 2(r-1), truncated at (x, y)."""
    s, w = 1.0 / 3.0, 2.0 / 3.0
    _check_regime(s, w, r, x, y, sieve, tau)
    deg = 2 * (r - 1)
    sel = _selectors(r, zl, list(range(deg + 1)))
    vals, tails = _T_with_tails(int(x), int(y), s, w, r, sieve, lct, tau, sel)
    D = tuple(tuple(mpmath.mpf(v) for v in row) for row in vals)
    Tl = tuple(tuple(mpmath.mpf(v) for v in row) for row in tails)
    return DConstants(r, mpmath.mpf(1) / 3, mpmath.mpf(2) / 3, int(x), int(y), D, Tl)


def D_constant(r, l1, l2, x, y, sieve, lct, tau, zl) -> SeriesValue:
    dm = D_matrix(r, x, y, sieve, lct, tau, zl)
    return SeriesValue(dm.D[l1][l2], (x, y), dm.tails[l1][l2])


# -- mean-square polynomial ----------------------------------------------

def L_polynomial(r, D) -> LPolynomial:
    """Coefficients of L with d/dT [T^c L(log T)] = T^(c-1) sum D_{l1,l2} (log T)^(l1+l2), c = 2r - 1/3."""
    deg = 2 * (r - 1)
    if D is None:
        raise MissingConstants("D matrix required", "D")
    if len(D) != deg + 1 or any(len(row) != deg + 1 for row in D):
        raise MissingConstants(f"D must be a {deg + 1}x{deg + 1} matrix", "D")
    with mpmath.workdps(L_DIGITS):
        c = 2 * r - mpmath.mpf(1) / 3
        coeffs = [mpmath.mpf(0)] * (2 * deg + 1)
        for l1 in range(deg + 1):
            for l2 in range(deg + 1):
                dv = mpmath.mpf(D[l1][l2])
                if not dv:
                    continue
                l = l1 + l2
                for t in range(l + 1):
                    coeffs[l - t] += dv * (-1) ** t * mpmath.factorial(l) / (c ** (t + 1) * mpmath.factorial(l - t))
    return LPolynomial(r, tuple(coeffs))


def L_derivative_residual(lp: LPolynomial, D, T):
    """|d/dT [T^c L(log T)] - T^(c-1) Q(log T)| / (T^(c-1) max(1, |Q|))."""
    with mpmath.workdps(L_DIGITS):
        c = 2 * lp.r - mpmath.mpf(1) / 3
        u = mpmath.log(mpmath.mpf(T))
        deriv = [i * v for i, v in enumerate(lp.coeffs)][1:]
        lhs = c * lp(u) + poly_eval(deriv, u)
        rhs = mpmath.mpf(0)
        deg = len(D) - 1
        for l1 in range(deg + 1):
            for l2 in range(deg + 1):
                rhs += mpmath.mpf(D[l1][l2]) * u ** (l1 + l2)
        return abs(lhs - rhs) / max(mpmath.mpf(1), abs(rhs))


def constants_json(dc: DConstants, lp: LPolynomial, digits=20):
    doc = {
        "r": dc.r,
        "s": mpmath.nstr(dc.s, digits),
        "w": mpmath.nstr(dc.w, digits),
        "x": dc.x,
        "y": dc.y,
        "D": [[mpmath.nstr(v, digits) for v in row] for row in dc.D],
        "tails": [[mpmath.nstr(v, 6) for v in row] for row in dc.tails],
        "L": [mpmath.nstr(v, digits) for v in lp.coeffs],
    }
    return json.dumps(doc, indent=2) + "\n"


def load_constants_json(text):
    doc = json.loads(text)
    D = tuple(tuple(mpmath.mpf(v) for v in row) for row in doc["D"])
    tails = tuple(tuple(mpmath.mpf(v) for v in row) for row in doc["tails"])
    dc = DConstants(int(doc["r"]), mpmath.mpf(doc["s"]), mpmath.mpf(doc["w"]), int(doc["x"]), int(doc["y"]), D, tails)
    return dc, LPolynomial(dc.r, tuple(mpmath.mpf(v) for v in doc["L"]))
