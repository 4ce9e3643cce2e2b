"""Batch command-line front end: ``divmom <command> [flags]``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import mpmath

from . import moments, series, voronoi
from .errors import DivisorMomentsError, UsageError
from .mainterm import MIN_DIGITS, d_coefficients_euler, delta_k_eval, export_d_json, residue_main_poly, zeta_laurent
from .multisum import build_multisum_table, multisum_csv
from .multivar import cached_local_coefficients, convolution_sweep, support_list
from .sieve import build_factor_sieve, build_tau_table, load_tau_table, save_tau_table

COMMANDS = ("sieve", "constants", "delta", "moments", "voronoi", "verify")


@dataclass
class RunConfig:
    command: str
    r: int = 1
    k: int = 3
    T: int = 1000
    box: int = 50
    X: int = 1000
    x: int | None = None
    y: int | None = None
    N: int | None = None
    precision: int = 50
    output: str | None = None
    format: str = "csv"
    deterministic: bool = False
    threads: int = 1

    def validate(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}", "command")
        if self.r < 1:
            raise UsageError("r must be >= 1", "r")
        if self.k < 2:
            raise UsageError("k must be >= 2", "k")
        if self.precision < MIN_DIGITS:
            raise UsageError(f"precision must be >= {MIN_DIGITS}", "precision")
        if self.format not in ("csv", "json"):
            raise UsageError("format must be csv or json", "format")
        if self.threads < 1:
            raise UsageError("threads must be >= 1", "threads")
        if self.T < 1:
            raise UsageError("T must be >= 1", "T")
        return self


_INT_KEYS = {"r", "k", "T", "box", "X", "x", "y", "N", "precision", "threads"}


def read_config_file(path):
    """Plain ``key=value`` lines; blank lines and ``#`` comments are skipped."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value", "config")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in {f.name for f in fields(RunConfig)} or key == "command":
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}", "config")
        if key in _INT_KEYS:
            out[key] = int(val)
        elif key == "deterministic":
            out[key] = val.lower() in ("1", "true", "yes", "on")
        else:
            out[key] = val
    return out


def build_parser():
    p = argparse.ArgumentParser(prog="divmom", description=__doc__)
    p.add_argument("command", choices=COMMANDS)
    for name in ("r", "k", "T", "box", "X", "x", "y", "N", "precision", "threads"):
        p.add_argument(f"--{name}", type=int, default=None)
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--output", default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--deterministic", action="store_true", default=None)
    return p


def config_from_args(argv):
    ns = build_parser().parse_args(argv)
    vals = read_config_file(ns.config) if ns.config else {}
    for f in fields(RunConfig):
        v = getattr(ns, f.name, None)
        if v is not None:
            vals[f.name] = v  # flags override the file
    vals["command"] = ns.command
    return RunConfig(**vals).validate()


# -- cached tables -------------------------------------------------------

def cache_dir():
    d = os.environ.get("DM_CACHE_DIR")
    return Path(d) if d else None


def get_tau(limit, k, sieve=None):
    d = cache_dir()
    path = d / f"tau_k{k}_n{limit}.dmt" if d else None
    if path is not None and path.exists():
        return load_tau_table(path)
    sieve = sieve or build_factor_sieve(limit)
    tau = build_tau_table(limit, k, sieve)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_tau_table(tau, path)
    return tau


def get_lct(r, k):
    return cached_local_coefficients(r, k, cache_dir=cache_dir())


def _dyadic_grid(T):
    grid, t = [], 2
    while t < T:
        grid.append(t)
        t *= 2
    return grid + [T]


# -- commands ------------------------------------------------------------

def cmd_sieve(cfg):
    sv = build_factor_sieve(cfg.T)
    tau = get_tau(cfg.T, cfg.k, sv)
    doc = {"k": cfg.k, "limit": cfg.T, "D_k(limit)": str(int(tau.prefix[cfg.T]))}
    if cfg.output:
        save_tau_table(tau, cfg.output)  # binary table; summary goes to stdout
        doc["cache"] = cfg.output
    return json.dumps(doc, indent=2) + "\n", None


def _laurent(cfg):
    return zeta_laurent(max(cfg.k + 2, 6), cfg.precision)


def cmd_constants(cfg):
    zl = _laurent(cfg)
    if cfg.x is not None or cfg.y is not None:
        if cfg.k != 3 or cfg.r < 2:
            raise UsageError("mean-square constants need k = 3 and r >= 2", "k")
        x = cfg.x or 1000
        y = cfg.y or 10 * x
        sv = build_factor_sieve(max(x, y))
        tau = get_tau(max(x, y), 3, sv)
        dc = series.D_matrix(cfg.r, x, y, sv, get_lct(cfg.r, 3), tau, zl)
        return series.constants_json(dc, series.L_polynomial(cfg.r, dc.D)), cfg.output
    if cfg.r == 1:
        p = residue_main_poly(cfg.k, zl)
        doc = {"r": 1, "k": cfg.k, "d": [mpmath.nstr(c, cfg.precision) for c in p.coeffs]}
        return json.dumps(doc, indent=2) + "\n", cfg.output
    mm = d_coefficients_euler(cfg.r, cfg.k, zl, get_lct(cfg.r, cfg.k))
    return export_d_json(mm, digits=cfg.precision), cfg.output


def _model(cfg):
    """Step model of Delta over [1, T] plus the objects it was built from."""
    sv = build_factor_sieve(cfg.T)
    tau = get_tau(cfg.T, cfg.k, sv)
    zl = _laurent(cfg)
    if cfg.r == 1:
        p = residue_main_poly(cfg.k, zl)
        return moments.model_from_tau(tau, p), dict(sieve=sv, tau=tau, zl=zl, poly=p)
    lct = get_lct(cfg.r, cfg.k)
    table = build_multisum_table(cfg.T, tau, support_list(cfg.T, cfg.r, cfg.k, sv, lct), cfg.r)
    mm = d_coefficients_euler(cfg.r, cfg.k, zl, lct)
    return moments.model_from_multisum(table, mm), dict(sieve=sv, tau=tau, zl=zl, lct=lct, table=table, mm=mm)


def cmd_delta(cfg):
    model, parts = _model(cfg)
    rows = _dyadic_grid(cfg.T)
    if cfg.r >= 2:
        return multisum_csv(parts["table"], parts["mm"], 25, rows), cfg.output
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "S", "delta_mid"])
    with mpmath.workdps(cfg.precision):
        for n in rows:
            d = delta_k_eval(parts["tau"], parts["poly"], mpmath.mpf(n) + mpmath.mpf("0.5"))
            w.writerow([n, int(parts["tau"].prefix[n]), mpmath.nstr(d, 25)])
    return buf.getvalue(), cfg.output


def _predictor(cfg, parts):
    if cfg.k != 3:
        return None
    if cfg.r == 1:
        tong = series.tong_constant(cfg.N or cfg.T, parts["tau"]).value
        return lambda T: moments.predicted_square_tong(T, tong)
    x = cfg.x or 1000
    y = cfg.y or 10 * x
    if y > parts["tau"].limit or x > parts["sieve"].limit:
        return None
    dc = series.D_matrix(cfg.r, x, y, parts["sieve"], parts["lct"], parts["tau"], parts["zl"])
    lp = series.L_polynomial(cfg.r, dc.D)
    return lambda T: moments.predicted_square_theorem2(T, cfg.r, lp)


def cmd_moments(cfg):
    model, parts = _model(cfg)
    rep = moments.build_moment_report(
        model, _dyadic_grid(cfg.T), _predictor(cfg, parts), cfg.precision, cfg.threads, cfg.deterministic
    )
    text = moments.report_json(rep) if cfg.format == "json" else moments.report_csv(rep)
    return text, cfg.output


def cmd_voronoi(cfg):
    if cfg.k != 3 or cfg.r != 1:
        raise UsageError("the truncated expansion is for Delta_3 (r = 1, k = 3)", "k")
    tau = get_tau(2 * cfg.T, 3)
    p = residue_main_poly(3, _laurent(cfg))
    Ns = [cfg.N] if cfg.N is not None else [0, round(cfg.T ** (1 / 3)), round(cfg.T ** 0.5)]
    rows = []
    for N in Ns:
        ms, ratio = voronoi.remainder_mean_square(cfg.T, N, voronoi.DEFAULT_NODES, tau, p)
        rows.append((cfg.T, N, ms, ratio))
    return voronoi.voronoi_csv(rows), cfg.output


def cmd_verify(cfg):
    if cfg.r < 2:
        raise UsageError("the convolution identity needs r >= 2", "r")
    sv = build_factor_sieve(cfg.box**cfg.r)
    tau_prod = get_tau(cfg.box**cfg.r, cfg.k, sv)
    ok, bad = convolution_sweep(cfg.box, cfg.r, cfg.k, sv, get_lct(cfg.r, cfg.k), tau_prod, tau_prod)
    doc = {"check": "convolution", "r": cfg.r, "k": cfg.k, "box": cfg.box, "ok": ok, "mismatches": bad}
    return json.dumps(doc) + "\n", cfg.output, (0 if ok else 1)


def run(cfg: RunConfig):
    """Execute ``cfg``; returns (exit status, report text)."""
    handler = globals()[f"cmd_{cfg.command}"]
    with mpmath.workdps(cfg.precision):
        out = handler(cfg)
    text, path = out[0], out[1]
    status = out[2] if len(out) > 2 else 0
    emit(text, path)
    return status, text


def emit(text, path=None):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _error(code, message, parameter=None):
    sys.stderr.write(json.dumps({"error": {"code": code, "message": message, "parameter": parameter}}) + "\n")


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = config_from_args(argv)
        status, _ = run(cfg)
        return status
    except SystemExit as exc:  # argparse
        if exc.code not in (0, None):
            _error("usage", "invalid command line", None)
        return int(exc.code or 0) and 2
    except DivisorMomentsError as exc:
        sys.stderr.write(json.dumps({"error": exc.record()}) + "\n")
        return 3
    except OSError as exc:
        _error("io", str(exc), getattr(exc, "filename", None))
        return 4


if __name__ == "__main__":
    sys.exit(main())
