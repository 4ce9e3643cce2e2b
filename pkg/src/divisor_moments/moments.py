"""Moments of a step-minus-smooth error term Delta(x) = S[floor x] - x^r Q(log x).

On each piece between breakpoints S is constant and M is monotone, so the
integrals of Delta, Delta^2 and |Delta|^3 follow from closed-form
antiderivatives of M^j, with one root split per piece for the cube.
Arithmetic runs in gmpy2 mpfr at a fixed binary precision.
"""

from __future__ import annotations

import bisect
import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import gmpy2
import mpmath
import numpy as np

from .errors import MissingConstants, RangeError, UsageError
from .powerseries import poly_derivative, poly_eval

DEFAULT_DIGITS = 50

# pointwise exponent bound for Delta_3 and mean-square exponent for Delta_k
ALPHA3 = mpmath.mpf(43) / 96


def beta(k):
    return mpmath.mpf(k - 1) / (2 * k)


@dataclass(frozen=True)
class StepModel:
    """Delta(x) = S[floor x] - x^r Q(log x) for 1 <= x < limit + 1."""

    r: int
    k: int
    Q: tuple
    S: object = field(repr=False)  # indexable by n, exact ints
    limit: int = 0

    def main(self, x):
        x = mpmath.mpf(x)
        return x**self.r * poly_eval(self.Q, mpmath.log(x))

    def delta(self, x):
        x = mpmath.mpf(x)
        return mpmath.mpf(int(self.S[int(mpmath.floor(x))])) - self.main(x)


def model_from_tau(tau, poly):
    if tau.k != poly.k:
        raise UsageError("tau table and main term built for different k", "k")
    return StepModel(1, tau.k, tuple(poly.coeffs), tau.prefix, tau.limit)


def model_from_multisum(table, mm):
    if table.r != mm.r or table.k != mm.k:
        raise UsageError("main term does not match the table (r, k)", "mm")
    return StepModel(table.r, table.k, tuple(mm.d), table.S, table.limit)


# -- closed-form antiderivatives -----------------------------------------

def antiderivative_poly(q, a):
    """R with d/dx [x^(a+1) R(log x)] = x^a q(log x)."""
    deg = len(q) - 1
    R = [mpmath.mpf(0)] * (deg + 1)
    a1 = mpmath.mpf(a) + 1
    for b, qb in enumerate(q):
        if not qb:
            continue
        fall = mpmath.mpf(1)
        for i in range(b + 1):
            R[b - i] += qb * (-1) ** i * fall / a1 ** (i + 1)
            fall *= b - i
    return R


def _poly_pow(q, j):
    out = [mpmath.mpf(1)]
    for _ in range(j):
        new = [mpmath.mpf(0)] * (len(out) + len(q) - 1)
        for i, a in enumerate(out):
            for l, b in enumerate(q):
                new[i + l] += a * b
        out = new
    return out


def _to_mpfr(v, digits):
    with mpmath.workdps(digits + 20):
        return gmpy2.mpfr(mpmath.nstr(v, digits + 15, strip_zeros=False))


class Neumaier:
    """Compensated running sum for mpfr (or float) terms."""

    __slots__ = ("s", "c")

    def __init__(self, zero):
        self.s = zero
        self.c = zero

    def add(self, x):
        t = self.s + x
        if abs(self.s) >= abs(x):
            self.c += (self.s - t) + x
        else:
            self.c += (x - t) + self.s
        self.s = t

    def value(self):
        return self.s + self.c


@dataclass
class ScanResult:
    T: float
    first: object
    square: object
    abs_cube: object
    max_abs: float
    sign_changes: int


def _point_mpfr(x):
    if isinstance(x, type(gmpy2.mpfr(0))):
        return x
    if isinstance(x, mpmath.mpf):
        man, exp = x.man_exp  # exact conversion, no decimal round trip
        return gmpy2.mul_2exp(gmpy2.mpfr(int(man)), int(exp))
    return gmpy2.mpfr(x)


class _Kernel:
    """Precomputed mpfr polynomial data for one StepModel."""

    def __init__(self, model, digits, cube=True):
        self.model = model
        self.digits = digits
        self.bits = int(digits * 3.33) + 16
        self.cube = cube
        r = model.r
        with mpmath.workdps(digits + 15):
            Q = [mpmath.mpf(c) for c in model.Q]
            self.R = [None]
            for j in (1, 2, 3):
                self.R.append(antiderivative_poly(_poly_pow(Q, j), j * r))
            crit = [r * a + b for a, b in zip(Q, poly_derivative(Q) + [0])]
        with gmpy2.context(gmpy2.get_context(), precision=self.bits):
            self.Qf = [_to_mpfr(c, digits) for c in Q]
            self.Rf = [None] + [[_to_mpfr(c, digits) for c in R] for R in self.R[1:]]
        self.Qfloat = [float(c) for c in Q]
        self.Qderivs_float = []
        d = [float(c) for c in Q]
        for i in range(len(Q)):
            self.Qderivs_float.append(d)
            d = [i * c for i, c in enumerate(d)][1:] or [0.0]
        # critical points of M, where r Q + Q' vanishes
        self.critical = []
        crit = [float(c) for c in crit]
        while len(crit) > 1 and crit[-1] == 0:
            crit.pop()
        if len(crit) > 1:
            roots = np.roots(crit[::-1])
            for z in roots:
                if abs(z.imag) < 1e-12 and z.real > 0:
                    x = math.exp(z.real)
                    if 1 <= x <= model.limit + 1:
                        self.critical.append(x)
        self.critical.sort()

    def point(self, x):
        """(M(x), G1, G2, G3) at x (int, float, mpfr or mpmath mpf), in mpfr."""
        r = self.model.r
        X = _point_mpfr(x)
        L = gmpy2.log(X)
        q = _horner(self.Qf, L)
        xr = X**r if r > 1 else X
        M = xr * q
        G1 = xr * X * _horner(self.Rf[1], L)
        x2 = xr * xr * X
        G2 = x2 * _horner(self.Rf[2], L)
        G3 = x2 * xr * _horner(self.Rf[3], L) if self.cube else None
        return M, G1, G2, G3

    def root(self, b0, b1, d0):
        """Offset h in (0, b1 - b0) of the zero of Delta, given Delta(b0) = d0 (float).

        Bisection on Delta(b0 + h) = d0 - (M(b0 + h) - M(b0)), with the
        increment written through expm1/log1p so it stays accurate for small h.
        """
        r = self.model.r
        L = math.log(b0)
        br = b0**r
        qs = [poly_eval(d, L) for d in self.Qderivs_float]
        q0 = qs[0]

        def inc(h):
            dl = math.log1p(h / b0)
            dq = 0.0
            term = 1.0
            for i in range(1, len(qs)):
                term *= dl / i
                dq += qs[i] * term
            return br * (math.expm1(r * dl) * (q0 + dq) + dq)

        lo, hi = 0.0, b1 - b0
        sgn = 1.0 if d0 > 0 else -1.0
        while hi - lo > 1e-12:
            mid = 0.5 * (lo + hi)
            if sgn * (d0 - inc(mid)) > 0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


def _horner(coeffs, x):
    acc = coeffs[-1]
    for c in reversed(coeffs[:-1]):
        acc = acc * x + c
    return acc


def _sign(v):
    return (v > 0) - (v < 0)


def _scan_chunk(model, digits, cube, start, stop, checkpoints):
    """Integrate over [start, stop], reporting cumulative values at each checkpoint.

    Checkpoints must lie in (start, stop].  Returns the checkpoint rows
    (T, first, square, cube as strings, running max |Delta|), the
    sign-change positions, and the first and last nonzero signs seen.
    """
    ker = _Kernel(model, digits, cube)
    S = model.S
    cp = sorted(c for c in checkpoints if start < c <= stop)
    specials = sorted(set(c for c in ker.critical + cp if start < c < stop))
    with gmpy2.context(gmpy2.get_context(), precision=ker.bits):
        zero = gmpy2.mpfr(0)
        acc1, acc2, acc3 = Neumaier(zero), Neumaier(zero), Neumaier(zero)
        maxabs = 0.0
        changes = []
        state = {"first": 0, "last": 0}

        def note(sg, where):
            if not sg:
                return
            if not state["first"]:
                state["first"] = sg
            elif sg != state["last"]:
                changes.append(where)
            state["last"] = sg

        out = []
        cpi = 0
        prev = None
        for b in _breakpoints(start, stop, specials):
            cur = (b, ker.point(b))
            if prev is not None:
                b0, (M0, G10, G20, G30) = prev
                b1, (M1, G11, G21, G31) = cur
                s = gmpy2.mpfr(int(S[math.floor(b0)]))
                width = _point_mpfr(b1) - _point_mpfr(b0)
                dG1 = G11 - G10
                dG2 = G21 - G20
                d0 = s - M0
                d1 = s - M1
                acc1.add(s * width - dG1)
                acc2.add(s * s * width - 2 * s * dG1 + dG2)
                f0 = float(d0)
                maxabs = max(maxabs, abs(f0), abs(float(d1)))
                sg0, sg1 = _sign(d0), _sign(d1)
                note(sg0, float(b0))
                crossing = sg0 * sg1 < 0
                if crossing:
                    X = _point_mpfr(b0) + gmpy2.mpfr(ker.root(float(b0), float(b1), f0))
                note(sg1, float(X) if crossing else float(b1))
                if cube:
                    if crossing:
                        _, G1x, G2x, G3x = ker.point(X)
                        s2, s3 = s * s, s * s * s
                        ia = s3 * (X - _point_mpfr(b0)) - 3 * s2 * (G1x - G10) + 3 * s * (G2x - G20) - (G3x - G30)
                        ib = s3 * (_point_mpfr(b1) - X) - 3 * s2 * (G11 - G1x) + 3 * s * (G21 - G2x) - (G31 - G3x)
                        acc3.add(abs(ia) + abs(ib))
                    else:
                        acc3.add(abs(s * s * s * width - 3 * s * s * dG1 + 3 * s * dG2 - (G31 - G30)))
                while cpi < len(cp) and cp[cpi] <= b1:
                    out.append((cp[cpi], str(acc1.value()), str(acc2.value()),
                                str(acc3.value()) if cube else "0", maxabs))
                    cpi += 1
            prev = cur
        return out, changes, state["first"], state["last"]


def _breakpoints(start, stop, specials):
    """Sorted breakpoints: start, every integer inside, specials, stop."""
    yield start
    si = 0
    n = math.floor(start) + 1
    while True:
        nxt = n if n < stop else stop
        while si < len(specials) and specials[si] < nxt:
            yield specials[si]
            si += 1
        if si < len(specials) and specials[si] == nxt:
            si += 1
        yield nxt
        if nxt >= stop:
            return
        n += 1


def _chunk_worker(args):
    return _scan_chunk(*args)


def scan(model, T_grid, T0=1, digits=DEFAULT_DIGITS, cube=True, threads=1, deterministic=True):
    """Cumulative moments of Delta from T0 up to every T in ``T_grid``.

    Returns (list of ScanResult, sorted sign-change positions).  With
    threads > 1 the range is cut into fixed chunks whose partial sums are
    combined in order; deterministic mode forces one serial pass.
    """
    grid = sorted(set(T_grid))
    if not grid:
        return [], []
    T1 = grid[-1]
    if T0 < 1:
        raise RangeError(f"T0={T0} < 1", "T0")
    if T1 >= model.limit + 1:
        raise RangeError(f"T={T1} beyond table limit {model.limit}", "T")
    if grid[0] < T0:
        raise RangeError("grid point below the window start", "T")
    if deterministic or threads <= 1 or T1 - T0 < 20000:
        cuts = [T0, T1]
    else:
        inner = np.linspace(T0, T1, threads + 1)[1:-1]
        cuts = [T0] + sorted(set(int(c) for c in inner if T0 < int(c) < T1)) + [T1]
    chunks = list(zip(cuts[:-1], cuts[1:]))
    jobs = [(model, digits, cube, a, b, [t for t in grid if a < t < b] + [b]) for a, b in chunks if b > a]
    if len(jobs) <= 1:
        parts = [_scan_chunk(*j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_chunk_worker, jobs))
    results = []
    changes = []
    with mpmath.workdps(digits + 10):
        base = [mpmath.mpf(0)] * 3
        maxabs = 0.0
        last = 0
        if T0 in grid:
            results.append(ScanResult(T0, mpmath.mpf(0), mpmath.mpf(0), mpmath.mpf(0), 0.0, 0))
        for (out, ch, first_sign, last_sign), job in zip(parts, jobs):
            a = job[3]
            if last and first_sign and first_sign != last:
                changes.append(float(a))
            changes.extend(ch)
            end = None
            for T, s1, s2, s3, mx in out:
                vals = [base[0] + mpmath.mpf(s1), base[1] + mpmath.mpf(s2), base[2] + mpmath.mpf(s3)]
                if T in grid:
                    results.append(ScanResult(T, +vals[0], +vals[1], +vals[2], max(maxabs, mx), 0))
                end = (vals, mx)
            base = end[0]
            maxabs = max(maxabs, end[1])
            if last_sign:
                last = last_sign
    changes.sort()
    for res in results:
        res.sign_changes = bisect.bisect_right(changes, res.T) - bisect.bisect_right(changes, T0)
    return results, changes


def _window(model, T0, T1, digits, cube=True):
    if T1 < T0:
        raise RangeError("T1 < T0", "T1")
    if T0 < 1 or T1 >= model.limit + 1:
        raise RangeError(f"window [{T0}, {T1}] outside [1, {model.limit + 1})", "T")
    if T1 == T0:
        return None
    res, changes = scan(model, [T1], T0=T0, digits=digits, cube=cube)
    return res[-1], changes


def integrate_square(T0, T1, model, digits=DEFAULT_DIGITS):
    w = _window(model, T0, T1, digits, cube=False)
    return mpmath.mpf(0) if w is None else w[0].square


def integrate_first(T0, T1, model, digits=DEFAULT_DIGITS):
    w = _window(model, T0, T1, digits, cube=False)
    return mpmath.mpf(0) if w is None else w[0].first


def integrate_abs_cube(T0, T1, model, digits=DEFAULT_DIGITS):
    w = _window(model, T0, T1, digits, cube=True)
    return mpmath.mpf(0) if w is None else w[0].abs_cube


def count_sign_changes(T0, T1, model, digits=DEFAULT_DIGITS):
    """Sign changes of Delta inside (T0, T1]."""
    w = _window(model, T0, T1, digits, cube=False)
    return 0 if w is None else w[0].sign_changes


def quadrature_oracle(model, a, b, power, absolute=False, dps=30):
    """Adaptive quadrature of Delta^power over [a, b], split at integers."""
    with mpmath.workdps(dps):
        a = mpmath.mpf(a)
        b = mpmath.mpf(b)
        pts = [a] + [mpmath.mpf(n) for n in range(int(mpmath.floor(a)) + 1, int(mpmath.ceil(b)))] + [b]
        total = mpmath.mpf(0)
        for u, v in zip(pts[:-1], pts[1:]):
            s = mpmath.mpf(int(model.S[int(mpmath.floor(u))]))

            def g(x, s=s):
                d = s - model.main(x)
                return abs(d) ** power if absolute else d**power

            total += mpmath.quad(g, [u, v])
        return total


def fit_exponent(pairs):
    """Least-squares slope of log(value) against log(T)."""
    pairs = list(pairs)
    if len(pairs) < 3:
        raise UsageError("need at least 3 (T, value) pairs", "pairs")
    T = np.array([float(t) for t, _ in pairs])
    v = np.array([float(x) for _, x in pairs])
    if np.any(v <= 0) or np.any(T <= 0):
        raise UsageError("values and T must be positive", "pairs")
    slope, _ = np.polyfit(np.log(T), np.log(v), 1)
    return float(slope)


# -- predictions and reports ---------------------------------------------

def predicted_square_theorem2(T, r, Lpoly):
    """(r^2 / (6 pi^2)) T^(2r - 1/3) L(log T)."""
    if Lpoly is None:
        raise MissingConstants("mean-square constants not available", "D")
    T = mpmath.mpf(T)
    c = 2 * r - mpmath.mpf(1) / 3
    return r**2 / (6 * mpmath.pi**2) * T**c * poly_eval(Lpoly.coeffs, mpmath.log(T))


def predicted_square_tong(T, tong):
    return tong * mpmath.mpf(T) ** (mpmath.mpf(5) / 3)


def compare_theorem2(T, r, square, Lpoly):
    """computed / predicted for the mean square over [1, T]."""
    pred = predicted_square_theorem2(T, r, Lpoly)
    return square / pred


@dataclass
class MomentReport:
    r: int
    k: int
    T_grid: list
    square: list
    first: list
    abs_cube: list
    sign_changes: list
    predicted_square: list
    ratio: list
    max_abs: list = field(default_factory=list)


def build_moment_report(model, T_grid, predictor=None, digits=DEFAULT_DIGITS, threads=1, deterministic=True):
    """MomentReport over [1, T] for each T; ``predictor(T)`` gives the predicted square."""
    res, changes = scan(model, T_grid, 1, digits, True, threads, deterministic)
    rep = MomentReport(model.r, model.k, [], [], [], [], [], [], [], [])
    prev = 1
    for rr in res:
        rep.T_grid.append(rr.T)
        rep.square.append(rr.square)
        rep.first.append(rr.first)
        rep.abs_cube.append(rr.abs_cube)
        lo = bisect.bisect_right(changes, prev)
        hi = bisect.bisect_right(changes, rr.T)
        rep.sign_changes.append(hi - lo if rr.T != prev else 0)
        prev = rr.T
        rep.max_abs.append(rr.max_abs)
        if predictor is not None:
            p = predictor(rr.T)
            rep.predicted_square.append(p)
            rep.ratio.append(rr.square / p if p else None)
        else:
            rep.predicted_square.append(None)
            rep.ratio.append(None)
    return rep


CSV_COLUMNS = ["T", "square", "first", "abs_cube", "sign_changes", "predicted_square", "ratio"]


def _fmt(v, digits):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return mpmath.nstr(mpmath.mpf(v), digits, strip_zeros=False, min_fixed=-1, max_fixed=1)


def _fmt_T(t):
    return str(int(t)) if float(t).is_integer() else repr(float(t))


def report_csv(rep: MomentReport, digits=20):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for i, T in enumerate(rep.T_grid):
        w.writerow(
            [
                _fmt_T(T),
                _fmt(rep.square[i], digits),
                _fmt(rep.first[i], digits),
                _fmt(rep.abs_cube[i], digits),
                str(rep.sign_changes[i]),
                _fmt(rep.predicted_square[i], digits),
                _fmt(rep.ratio[i], digits),
            ]
        )
    return buf.getvalue()


def report_json(rep: MomentReport, digits=20):
    rows = []
    for i, T in enumerate(rep.T_grid):
        rows.append(
            {
                "T": _fmt_T(T),
                "square": _fmt(rep.square[i], digits),
                "first": _fmt(rep.first[i], digits),
                "abs_cube": _fmt(rep.abs_cube[i], digits),
                "sign_changes": rep.sign_changes[i],
                "predicted_square": _fmt(rep.predicted_square[i], digits),
                "ratio": _fmt(rep.ratio[i], digits),
            }
        )
    doc = {"r": rep.r, "k": rep.k, "columns": CSV_COLUMNS, "rows": rows}
    return json.dumps(doc, indent=2) + "\n"
