"""Monte Carlo coverage study for the bootstrap interval methods.

One run simulates REP datasets at a fixed (theta_x, beta_m, n), builds the
requested confidence intervals for each, and reports non-coverage rejection
frequencies (ncRFs): the percentage of intervals lying entirely to the left
(upper limit below the true gamma) or right (lower limit above it) of the
true value, with significance flags against the binomial Monte Carlo band.

Replications are the parallel unit. Every replication owns random streams
keyed by (seed, replication index, level, draw index), so the table is
bit-identical for any worker count, and aggregation is plain integer sums.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bootstrap import Scheme, draws_from_batch, resample_and_fit
from .double_bootstrap import (
    DoubleBootConfig,
    calibrated_interval,
    second_level_counts,
    tail_indices,
)
from .errors import InputError, MedibootError
from .intervals import METHODS, basic, bc, bca, percentile, percentile_t
from .model import Dataset, fit_mediation, jackknife, sobel_se
from .rng import RngStream

# Stream domains under the master seed
_DESIGN = 0
_REP = 1
_DATA = 0
_SCHEME = 2

_SCHEME_INDEX = {Scheme.PAIRED: 0, Scheme.RESIDUAL: 1, Scheme.PARAMETRIC: 2}

_DOUBLE_METHODS = {"percentile_d", "basic_d"}


@dataclass(frozen=True)
class SimConfig:
    n: int
    theta_x: float
    beta_m: float
    beta_x: float = 0.0
    sigma_v: float = 1.0
    sigma_u: float = 1.0
    REP: int = 10_000
    B: int = 1999
    C: int = 1000
    M: int = 1000
    level: float = 0.95
    schemes: tuple[str, ...] = ("residual",)
    methods: tuple[str, ...] = ("percentile",)
    seed: int = 0
    var_divisor: str = "n-1"  # divisor convention for the fixed-x rescaling
    collect_scatter: bool = False

    def __post_init__(self):
        if self.n < 10:
            raise InputError(f"need n >= 10, got {self.n}")
        if self.REP < 100:
            raise InputError(f"need REP >= 100, got {self.REP}")
        if self.var_divisor not in ("n-1", "n"):
            raise InputError("var_divisor must be 'n-1' or 'n'")
        for s in self.schemes:
            Scheme(s)
        for m in self.methods:
            if m not in METHODS:
                raise InputError(f"unknown interval method {m!r}")


QUICK_PROFILE = dict(REP=2000, B=999, C=250, M=500)
FULL_PROFILE = dict(REP=10_000, B=1999, C=1000, M=1000)


@dataclass
class NcrfRow:
    left_count: int = 0
    right_count: int = 0
    fail_count: int = 0
    redraws: int = 0


@dataclass
class NcrfTable:
    rows: dict[tuple, NcrfRow]
    rep: int
    level: float
    scatter: list[tuple] | None = None

    def left_pct(self, key) -> float:
        return 100.0 * self.rows[key].left_count / self.rep

    def right_pct(self, key) -> float:
        return 100.0 * self.rows[key].right_count / self.rep

    def total_pct(self, key) -> float:
        return self.left_pct(key) + self.right_pct(key)

    def flags(self, key) -> tuple[bool, bool, bool]:
        alpha = 1.0 - self.level
        lo_t, hi_t = ncrf_band(self.rep, alpha / 2.0)
        lo_s, hi_s = ncrf_band(self.rep, alpha)
        l, r, t = self.left_pct(key), self.right_pct(key), self.total_pct(key)
        return (not lo_t <= l <= hi_t, not lo_t <= r <= hi_t, not lo_s <= t <= hi_s)

    def merge(self, other: "NcrfTable") -> "NcrfTable":
        if other.rep != self.rep or other.level != self.level:
            raise InputError("cannot merge tables with different REP or level")
        rows = dict(self.rows)
        rows.update(other.rows)
        scatter = (self.scatter or []) + (other.scatter or []) or None
        return NcrfTable(rows, self.rep, self.level, scatter)


def make_design(n: int, rng: RngStream, var_divisor: str = "n-1") -> np.ndarray:
    """Fixed regressor: standard-normal draws, demeaned, unit sample variance."""
    if n < 10:
        raise InputError(f"need n >= 10, got {n}")
    x = rng.generator().standard_normal(n)
    x = x - x.mean()
    div = n - 1 if var_divisor == "n-1" else n
    return x / math.sqrt(float(x @ x) / div)


def simulate_dataset(x: np.ndarray, cfg: SimConfig, rng: RngStream) -> Dataset:
    """Draw one dataset from the model at the configured parameters."""
    gen = rng.generator()
    n = len(x)
    v = gen.standard_normal(n)
    u = gen.standard_normal(n)
    m = cfg.theta_x * x + cfg.sigma_v * v
    y = cfg.beta_x * x + cfg.beta_m * m + cfg.sigma_u * u
    return Dataset(x - x.mean(), m - m.mean(), y - y.mean(), demeaned=True)


def ncrf_band(REP: int, tail: float) -> tuple[float, float]:
    """95% Monte Carlo band around a tail probability, in percent."""
    if REP < 100:
        raise InputError(f"need REP >= 100, got {REP}")
    if not 0.0 < tail < 0.5:
        raise InputError(f"tail must lie in (0, 0.5), got {tail}")
    half = 1.96 * math.sqrt(tail * (1.0 - tail) / REP)
    return ((tail - half) * 100.0, (tail + half) * 100.0)


def _rep_result(cfg: SimConfig, x: np.ndarray, r: int, extra_methods=None):
    """All interval endpoints for one replication.

    Returns ({(scheme, method): (L, R) or None on failure}, redraws,
    scatter record or None).
    """
    rng = RngStream(cfg.seed, path=(_REP, r))
    d = simulate_dataset(x, cfg, rng.child(_DATA))
    fit = fit_mediation(d)
    gamma_true = cfg.theta_x * cfg.beta_m
    methods = list(cfg.methods)
    extra_methods = extra_methods or {}

    jack = None
    if "bca" in methods or "percentile_t_jack" in methods:
        try:
            jack = jackknife(d)
        except MedibootError:
            jack = None
    se_sobel = sobel_se(fit) if "percentile_t_sobel" in methods else None

    need_double = bool(_DOUBLE_METHODS & set(methods))
    keep = need_double or "percentile_t_jack" in methods

    out: dict[tuple, tuple[int, int] | None] = {}
    redraws: dict[str, int] = {}
    covered_flags: dict[tuple, bool] = {}
    for scheme_name in cfg.schemes:
        scheme = Scheme(scheme_name)
        srng = rng.child(_SCHEME, _SCHEME_INDEX[scheme])
        batch = resample_and_fit(d, fit, scheme, cfg.B, srng.child(1).generator(), keep_data=keep)
        redraws[scheme_name] = batch.redraws
        draws = draws_from_batch(batch, fit, "none")

        double_cache = None
        for method in list(methods) + list(extra_methods):
            key = (scheme_name, method)
            if method in ("bca", "percentile_t_jack") and jack is None:
                out[key] = None
                continue
            try:
                if method == "basic":
                    ci = basic(draws, cfg.level)
                elif method == "percentile":
                    ci = percentile(draws, cfg.level)
                elif method == "bc":
                    ci = bc(draws, cfg.level)
                elif method == "bca":
                    ci = bca(draws, jack.accel, cfg.level)
                elif method == "percentile_t_sobel":
                    tdraws = draws_from_batch(batch, fit, "sobel")
                    ci = percentile_t(tdraws, se_sobel, cfg.level)
                elif method == "percentile_t_jack":
                    tdraws = draws_from_batch(batch, fit, "jackknife")
                    ci = percentile_t(tdraws, jack.se_jack, cfg.level)
                elif method in _DOUBLE_METHODS:
                    if double_cache is None:
                        dcfg = DoubleBootConfig(B=cfg.B, C=cfg.C, M=cfg.M)
                        retained, positions = tail_indices(batch.gamma, cfg.M)
                        c_le, _, c_basic = second_level_counts(
                            batch, retained, scheme, cfg.C, fit.gamma_hat, srng
                        )
                        gamma_sorted = np.sort(batch.gamma, kind="stable")
                        double_cache = (dcfg, positions, c_le, c_basic, gamma_sorted)
                    dcfg, positions, c_le, c_basic, gamma_sorted = double_cache
                    counts = c_le if method == "percentile_d" else c_basic
                    ci = calibrated_interval(
                        gamma_sorted,
                        fit.gamma_hat,
                        positions,
                        counts / cfg.C,
                        dcfg,
                        cfg.level,
                        "percentile" if method == "percentile_d" else "basic",
                    )
                else:
                    lo, hi = extra_methods[method](draws, fit, cfg.level)
                    ci = None
                    lower, upper = lo, hi
                if ci is not None:
                    lower, upper = ci.lower, ci.upper
                left = int(upper < gamma_true)
                right = int(lower > gamma_true)
                out[key] = (left, right)
                covered_flags[key] = not (left or right)
            except MedibootError:
                out[key] = None
    scatter = None
    if cfg.collect_scatter:
        scatter = (r, fit.theta_x_hat, fit.beta_m_hat, covered_flags)
    return out, redraws, scatter


def _run_block(cfg: SimConfig, rep_lo: int, rep_hi: int, extra_methods=None):
    x = make_design(cfg.n, RngStream(cfg.seed, path=(_DESIGN,)), cfg.var_divisor)
    rows: dict[tuple, NcrfRow] = {}
    scatter = []
    for r in range(rep_lo, rep_hi):
        res, redraws, sc = _rep_result(cfg, x, r, extra_methods)
        for key, lr in res.items():
            row = rows.setdefault(key, NcrfRow())
            if lr is None:
                row.fail_count += 1
            else:
                row.left_count += lr[0]
                row.right_count += lr[1]
            # redraws are a per-scheme diagnostic; book them on every row of
            # the scheme so the csv stays flat (they repeat, not sum, per key)
            row.redraws += redraws.get(key[0], 0)
        if sc is not None:
            scatter.append(sc)
    return rows, scatter


def run_study(cfg: SimConfig, workers: int = 1, extra_methods=None) -> NcrfTable:
    """Run the full simulation and aggregate the non-coverage table."""
    rep = cfg.REP
    if workers <= 1:
        blocks = [_run_block(cfg, 0, rep, extra_methods)]
    else:
        bounds = np.linspace(0, rep, workers * 4 + 1, dtype=int)
        spans = [(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futs = [pool.submit(_run_block, cfg, lo, hi, extra_methods) for lo, hi in spans]
            blocks = [f.result() for f in futs]

    rows: dict[tuple, NcrfRow] = {}
    scatter: list[tuple] = []
    for brows, bscatter in blocks:
        for (scheme, method), brow in brows.items():
            key = (scheme, method, cfg.theta_x, cfg.beta_m, cfg.n)
            row = rows.setdefault(key, NcrfRow())
            row.left_count += brow.left_count
            row.right_count += brow.right_count
            row.fail_count += brow.fail_count
            row.redraws += brow.redraws
        scatter.extend(bscatter)
    scatter.sort(key=lambda t: t[0])

    for key, row in rows.items():
        if row.fail_count > 0.001 * rep:
            raise MedibootError(
                f"{row.fail_count} of {rep} replications failed for {key}"
            )
    return NcrfTable(rows, rep, cfg.level, scatter or None)


def emit_outputs(table: NcrfTable, dest: str) -> list[str]:
    """Write ncrf.csv, an aligned text table, diagnostics, and figure data."""
    os.makedirs(dest, exist_ok=True)
    written = []

    csv_path = os.path.join(dest, "ncrf.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("scheme,method,theta_x,beta_m,n,left,right,total,flag_l,flag_r,flag_t\n")
        for key in sorted(table.rows):
            scheme, method, theta, beta, n = key
            fl, fr, ft = table.flags(key)
            fh.write(
                f"{scheme},{method},{theta:g},{beta:g},{n},"
                f"{table.left_pct(key):.4f},{table.right_pct(key):.4f},{table.total_pct(key):.4f},"
                f"{int(fl)},{int(fr)},{int(ft)}\n"
            )
    written.append(csv_path)

    txt_path = os.path.join(dest, "ncrf.txt")
    with open(txt_path, "w", encoding="utf-8") as fh:
        fh.write(format_table(table))
    written.append(txt_path)

    diag_path = os.path.join(dest, "diagnostics.json")
    diag = {
        "rep": table.rep,
        "level": table.level,
        "cells": {
            "|".join(map(str, key)): {
                "failures": row.fail_count,
                "redraws": row.redraws,
            }
            for key, row in sorted(table.rows.items())
        },
    }
    with open(diag_path, "w", encoding="utf-8") as fh:
        json.dump(diag, fh, indent=2)
    written.append(diag_path)

    if table.scatter:
        sc_path = os.path.join(dest, "fig2_scatter.csv")
        method_keys = sorted({k for *_, flags in table.scatter for k in flags})
        with open(sc_path, "w", encoding="utf-8") as fh:
            header = ["rep", "theta_x_hat", "beta_m_hat"] + [
                f"covered_{s}_{m}" for s, m in method_keys
            ]
            fh.write(",".join(header) + "\n")
            for r, th, bm, flags in table.scatter:
                vals = [str(r), f"{th:.10g}", f"{bm:.10g}"] + [
                    str(int(flags.get(k, False))) for k in method_keys
                ]
                fh.write(",".join(vals) + "\n")
        written.append(sc_path)
    return written


def format_table(table: NcrfTable) -> str:
    """Human-readable aligned layout: one row per (scheme, parameters),
    L/R percentage pairs per method, asterisks for significant cells."""
    keys = sorted(table.rows)
    methods = sorted({k[1] for k in keys}, key=lambda m: METHODS.index(m) if m in METHODS else 99)
    groups: dict[tuple, dict[str, tuple]] = {}
    for key in keys:
        scheme, method, theta, beta, n = key
        groups.setdefault((scheme, theta, beta, n), {})[method] = key

    lines = []
    head = f"{'scheme':<10}{'(theta,beta)':<14}{'n':<6}"
    for m in methods:
        head += f"{m + ' L':>12}{m + ' R':>12}"
    lines.append(head)
    lines.append("-" * len(head))
    for (scheme, theta, beta, n), cells in sorted(groups.items()):
        line = f"{scheme:<10}{f'({theta:g},{beta:g})':<14}{n:<6}"
        for m in methods:
            if m in cells:
                key = cells[m]
                fl, fr, _ = table.flags(key)
                line += f"{table.left_pct(key):>10.1f}{'*' if fl else ' ':<2}"
                line += f"{table.right_pct(key):>10.1f}{'*' if fr else ' ':<2}"
            else:
                line += f"{'-':>12}{'-':>12}"
        lines.append(line)
    return "\n".join(lines) + "\n"
