"""Second-level bootstrap calibration of percentile and basic intervals.

Each first-level resample can be refitted and resampled again; the fraction
of second-level estimates at or below a reference value acts as a p-value
u*_b. Order statistics of these p-values give the calibrated quantile
levels for the two-sided interval. Because extreme p-values arise from the
extreme first-level replicates, the p-values are only computed for the M/2
smallest and M/2 largest sorted replicates (the M-subset speedup), with the
rank mapping stretched by B/M. The run verifies rather than assumes that
the selected ranks fall strictly inside the computed tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bootstrap import (
    BootstrapDraws,
    Scheme,
    _resample_block,
    resample_and_fit,
)
from .errors import InputError, ResourceError
from .intervals import ConfidenceInterval
from .model import BatchFit, Dataset, MediationFit, demean, fit_batch, fit_mediation
from .rng import RngStream

# Stream sub-keys: first level draws, then one stream per retained sample
_LEVEL1 = 1
_LEVEL2 = 2

# Upper bound on first-level cells (B * n * 3 floats) kept for the second level
_DEFAULT_CELL_BUDGET = 200_000_000


@dataclass(frozen=True)
class DoubleBootConfig:
    B: int = 1999
    C: int = 1000
    M: int = 1000
    variant: str = "percentile"
    cell_budget: int = _DEFAULT_CELL_BUDGET

    def __post_init__(self):
        if self.M % 2 != 0 and self.M != self.B:
            raise InputError("M must be even (half per tail) unless M = B")
        if self.M > self.B:
            raise InputError("M cannot exceed B")
        if self.C < 100:
            raise InputError("need C >= 100 second-level draws")
        if self.variant not in ("percentile", "basic"):
            raise InputError(f"unknown double-bootstrap variant {self.variant!r}")


@dataclass(frozen=True)
class PValueSet:
    """Second-level p-values keyed by first-level draw index."""

    u_tilde: list[tuple[int, float]]
    computed_count: int


def second_level_pvalue(
    first_sample: Dataset,
    gamma_ref: float,
    scheme: Scheme,
    C: int,
    rng: RngStream,
) -> float:
    """Refit the first-level sample, draw C resamples, return the fraction
    of second-level estimates at or below ``gamma_ref``."""
    dd = first_sample if first_sample.demeaned else demean(first_sample)
    fit = fit_mediation(dd)
    batch = resample_and_fit(dd, fit, Scheme(scheme), C, rng.generator())
    return float(np.count_nonzero(batch.gamma <= gamma_ref)) / C


def first_level_batch(
    d: Dataset,
    fit: MediationFit,
    scheme: Scheme,
    cfg: DoubleBootConfig,
    rng: RngStream,
) -> BatchFit:
    """First-level resample batch with datasets kept for the second level."""
    if cfg.B * d.n * 3 > cfg.cell_budget:
        raise ResourceError(
            f"first-level retention needs {cfg.B * d.n * 3} cells, budget is {cfg.cell_budget}"
        )
    return resample_and_fit(d, fit, Scheme(scheme), cfg.B, rng.child(_LEVEL1).generator(), keep_data=True)


def _second_level_fit(batch: BatchFit, b: int) -> tuple[tuple[float, float, float, float, float], tuple[np.ndarray, np.ndarray]]:
    """Refit parameters and rescaled residual pools for first-level sample b."""
    n = batch.n
    x, m, y = batch.x[b], batch.m[b], batch.y[b]
    theta = float(batch.theta[b])
    beta_x = float(batch.beta_x[b])
    beta_m = float(batch.beta_m[b])
    s_v2 = float(batch.ssv[b]) / (n - 2)
    s_u2 = float(batch.ssu[b]) / (n - 3)
    v_hat = m - theta * x
    u_hat = y - beta_x * x - beta_m * m
    pools = (
        math.sqrt(n / (n - 2)) * v_hat,
        math.sqrt(n / (n - 3)) * u_hat,
    )
    return (theta, beta_x, beta_m, s_v2, s_u2), pools


def second_level_counts(
    batch: BatchFit,
    indices: np.ndarray,
    scheme: Scheme,
    C: int,
    gamma_hat: float,
    rng: RngStream,
    chunk: int = 32,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Second-level <=gamma_hat counts for the given first-level indices.

    Returns (count_le, count_lt, count_le_basic) arrays aligned with
    ``indices``; the basic counts use the reflected reference
    2*gamma*_b - gamma_hat. Streams are keyed per first-level index so the
    result does not depend on chunking or tail selection.
    """
    scheme = Scheme(scheme)
    indices = np.asarray(indices, dtype=np.int64)
    count_le = np.empty(len(indices), dtype=np.int64)
    count_lt = np.empty(len(indices), dtype=np.int64)
    count_basic = np.empty(len(indices), dtype=np.int64)

    for start in range(0, len(indices), chunk):
        group = indices[start : start + chunk]
        gens, blocks, fits = [], [], []
        for b in group:
            gen = rng.child(_LEVEL2, int(b)).generator()
            fit_vals, pools = _second_level_fit(batch, int(b))
            xs, ms, ys = _resample_block(
                scheme, batch.x[b], batch.m[b], batch.y[b], fit_vals, pools, C, gen
            )
            gens.append((gen, fit_vals, pools, int(b)))
            blocks.append((xs, ms, ys))
        gfit = fit_batch(
            np.concatenate([bl[0] for bl in blocks]),
            np.concatenate([bl[1] for bl in blocks]),
            np.concatenate([bl[2] for bl in blocks]),
        )
        gamma2 = gfit.gamma.reshape(len(group), C).copy()
        singular = gfit.singular.reshape(len(group), C)
        for j, (gen, fit_vals, pools, b) in enumerate(gens):
            bad = np.flatnonzero(singular[j])
            attempts = 0
            while bad.size and attempts < 100:
                xs, ms, ys = _resample_block(
                    scheme, batch.x[b], batch.m[b], batch.y[b], fit_vals, pools, bad.size, gen
                )
                sub = fit_batch(xs, ms, ys)
                gamma2[j, bad] = sub.gamma
                bad = bad[sub.singular]
                attempts += 1
            if bad.size:
                raise ResourceError("singular second-level resamples persisted past retry cap")
        for j, b in enumerate(group):
            row = gamma2[j]
            count_le[start + j] = np.count_nonzero(row <= gamma_hat)
            count_lt[start + j] = np.count_nonzero(row < gamma_hat)
            ref = 2.0 * float(batch.gamma[b]) - gamma_hat
            count_basic[start + j] = np.count_nonzero(row <= ref)
    return count_le, count_lt, count_basic


def _rank(prob: float, size: int) -> int:
    k = int(math.floor(prob * (size + 1) + 0.5))
    return min(max(k, 1), size)


def calibrated_interval(
    gamma_sorted: np.ndarray,
    gamma_hat: float,
    tail_positions: np.ndarray,
    u_values: np.ndarray,
    cfg: DoubleBootConfig,
    level: float,
    variant: str,
) -> ConfidenceInterval:
    """Two-sided calibrated interval from second-level p-values.

    ``tail_positions`` holds, for each p-value, the rank of its first-level
    sample in the sorted replicate vector (0-based); it is used both for
    the validity flag and to detect the inner boundary of each tail.
    """
    B = len(gamma_sorted)
    Mv = len(u_values)
    alpha = 1.0 - level
    prob_lo = (cfg.B / cfg.M) * alpha / 2.0
    k_lo = _rank(prob_lo, Mv)
    # equal-tailed by construction: the upper rank mirrors the lower one,
    # which keeps the M-subset rank mapping consistent with the full run
    k_hi = Mv + 1 - k_lo

    order = np.argsort(u_values, kind="stable")
    delta_lo = float(u_values[order[k_lo - 1]])
    delta_hi = float(u_values[order[k_hi - 1]])

    # Validity: the selected order statistics must come from strictly inside
    # the computed tails (always the case when M = B).
    if Mv == B:
        valid = True
    else:
        half = Mv // 2
        inner = {half - 1, B - half}
        valid = all(
            int(tail_positions[order[k - 1]]) not in inner for k in (k_lo, k_hi)
        )

    eps = 1.0 / (B + 1)
    if variant == "percentile":
        a1 = min(max(1.0 - delta_hi, eps), 1.0 - eps)
        a2 = min(max(1.0 - delta_lo, eps), 1.0 - eps)
        lo = gamma_sorted[_rank(a1, B) - 1]
        hi = gamma_sorted[_rank(a2, B) - 1]
        method = "percentile_d"
    else:
        a1 = min(max(delta_lo, eps), 1.0 - eps)
        a2 = min(max(delta_hi, eps), 1.0 - eps)
        lo = 2.0 * gamma_hat - gamma_sorted[_rank(a2, B) - 1]
        hi = 2.0 * gamma_hat - gamma_sorted[_rank(a1, B) - 1]
        method = "basic_d"
    return ConfidenceInterval(
        float(lo), float(hi), method, level, a1, a2, tail_rank_valid=valid
    )


def tail_indices(gamma: np.ndarray, M: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw indices of the M/2 smallest and M/2 largest replicates.

    Returns (indices into the draw order, positions in the sorted vector).
    """
    order = np.argsort(gamma, kind="stable")
    if M >= len(gamma):
        positions = np.arange(len(gamma))
    else:
        half = M // 2
        positions = np.concatenate([np.arange(half), np.arange(len(gamma) - half, len(gamma))])
    return order[positions], positions


def run_double(
    d: Dataset,
    scheme: Scheme,
    cfg: DoubleBootConfig,
    level: float,
    rng: RngStream,
) -> ConfidenceInterval:
    """Full calibrated two-sided interval for one dataset."""
    dd = d if d.demeaned else demean(d)
    fit = fit_mediation(dd)
    batch = first_level_batch(dd, fit, scheme, cfg, rng)
    retained, positions = tail_indices(batch.gamma, cfg.M)
    count_le, _, count_basic = second_level_counts(
        batch, retained, scheme, cfg.C, fit.gamma_hat, rng
    )
    counts = count_le if cfg.variant == "percentile" else count_basic
    u_values = counts / cfg.C
    gamma_sorted = np.sort(batch.gamma, kind="stable")
    return calibrated_interval(
        gamma_sorted, fit.gamma_hat, positions, u_values, cfg, level, cfg.variant
    )


def pvalue_set(
    d: Dataset,
    scheme: Scheme,
    cfg: DoubleBootConfig,
    rng: RngStream,
) -> PValueSet:
    """The computed (index, p-value) pairs for inspection or plotting."""
    dd = d if d.demeaned else demean(d)
    fit = fit_mediation(dd)
    batch = first_level_batch(dd, fit, scheme, cfg, rng)
    retained, _ = tail_indices(batch.gamma, cfg.M)
    count_le, _, count_basic = second_level_counts(
        batch, retained, scheme, cfg.C, fit.gamma_hat, rng
    )
    counts = count_le if cfg.variant == "percentile" else count_basic
    pairs = [(int(b), float(c) / cfg.C) for b, c in zip(retained, counts)]
    return PValueSet(pairs, computed_count=len(pairs))


def calibration_curve(
    d: Dataset,
    scheme: Scheme,
    cfg: DoubleBootConfig,
    grid: list[float],
    rng: RngStream,
) -> list[tuple[float, float]]:
    """Estimated coverage of the two-sided percentile interval per nominal
    level: the fraction of first-level samples whose second-level interval
    contains the original estimate."""
    if any(not 0.0 < g < 1.0 for g in grid):
        raise InputError("grid levels must lie in (0, 1)")
    dd = d if d.demeaned else demean(d)
    fit = fit_mediation(dd)
    batch = first_level_batch(dd, fit, scheme, cfg, rng)
    count_le, count_lt, _ = second_level_counts(
        batch, np.arange(cfg.B), scheme, cfg.C, fit.gamma_hat, rng
    )
    out = []
    for lvl in grid:
        a = 1.0 - lvl
        k1 = _rank(a / 2.0, cfg.C)
        k2 = cfg.C + 1 - k1
        covered = (count_le >= k1) & (count_lt <= k2 - 1)
        out.append((float(lvl), float(covered.mean())))
    return out
