"""Truncated Voronoi sum for Delta_3 and the mean square of its remainder."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import mpmath
import numpy as np

from .errors import RangeError, UsageError

DEFAULT_NODES = 8


@dataclass(frozen=True)
class VoronoiConfig:
    N: int
    sample_count: int
    T: float

    def __post_init__(self):
        if self.N < 0:
            raise UsageError("N must be >= 0", "N")
        if self.N > 0 and self.N**3 > self.T**2:  # N <= T^(2/3) without rounding
            raise RangeError(f"N={self.N} outside [1, T^(2/3)] for T={self.T}", "N")
        if self.sample_count < 1:
            raise UsageError("sample_count must be >= 1", "sample_count")


def delta31(x, N, tau):
    """x^(1/3)/(sqrt(3) pi) sum_{n<=N} tau_3(n) n^(-2/3) cos(6 pi (n x)^(1/3))."""
    if N > tau.limit:
        raise RangeError(f"N={N} beyond tau table limit {tau.limit}", "N")
    if tau.k != 3:
        raise UsageError("the expansion is for tau_3", "k")
    x = mpmath.mpf(x)
    if x <= 0:
        raise RangeError("x must be positive", "x")
    acc = mpmath.mpf(0)
    for n in range(1, int(N) + 1):
        t = 3 * mpmath.cbrt(n * x)
        frac = t - mpmath.floor(t)  # 6 pi (nx)^(1/3) = 2 pi t, reduced mod 2 pi
        acc += int(tau.tau[n]) * mpmath.mpf(n) ** (-mpmath.mpf(2) / 3) * mpmath.cospi(2 * frac)
    return mpmath.cbrt(x) / (mpmath.sqrt(3) * mpmath.pi) * acc


def delta31_array(x, N, tau, block=1 << 16):
    """float64 version of :func:`delta31` at many points."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    if N == 0:
        return out
    n = np.arange(1, int(N) + 1, dtype=float)
    w = tau.tau[1 : int(N) + 1].astype(float) * n ** (-2.0 / 3.0)
    cn = np.cbrt(n)
    flat = x.reshape(-1)
    res = out.reshape(-1)
    for i in range(0, len(flat), block):
        xs = flat[i : i + block]
        t = 3.0 * np.outer(np.cbrt(xs), cn)
        t -= np.floor(t)
        res[i : i + block] = np.cos(2 * np.pi * t) @ w
    return out * np.cbrt(x) / (np.sqrt(3.0) * np.pi)


def remainder_mean_square(T, N, samples, tau, mainterm, nodes=None):
    """Integral over [T, 2T] of (Delta_3 - delta31(., N))^2.

    Integrated with Gauss-Legendre on each unit interval (S is constant
    there and both terms are smooth); ``samples`` is the node count per
    interval.  Returns (ms, ms / (T^(5/3) N^(-1/3) + T^(14/9))).
    """
    nodes = samples if nodes is None else nodes
    T = int(T)
    if 2 * T > tau.limit:
        raise RangeError(f"2T={2 * T} beyond tau table limit {tau.limit}", "T")
    if N > 0:
        VoronoiConfig(N, nodes, T)
    g, wg = np.polynomial.legendre.leggauss(nodes)
    g = (g + 1) / 2
    wg = wg / 2
    n = np.arange(T, 2 * T)
    xs = n[:, None] + g[None, :]
    L = np.log(xs)
    Q = [float(c) for c in mainterm.coeffs]
    M = xs * np.polyval(Q[::-1], L)
    D = tau.prefix_int64()[n].astype(float)[:, None]
    err = D - M - delta31_array(xs, N, tau)
    ms = float(np.sum((err**2) @ wg))
    bound = T ** (5.0 / 3.0) * (N ** (-1.0 / 3.0) if N > 0 else 1.0) + T ** (14.0 / 9.0)
    return ms, ms / bound


def voronoi_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["T", "N", "ms", "bound_ratio"])
    for T, N, ms, ratio in rows:
        w.writerow([T, N, repr(float(ms)), repr(float(ratio))])
    return buf.getvalue()
