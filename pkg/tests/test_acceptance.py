"""End-to-end acceptance checks for the whole package.

Each test exercises one headline property at its stated tolerance: exact
distribution quantiles and moments, studentized-marginal distributional
properties, the bootstrap/exact-distribution bridge, desk-scale coverage
tables, interval identities, double-bootstrap oracle equivalence, and
worker-count determinism.  The coverage-table tests share module-scoped
simulation fixtures and dominate the runtime of the suite.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest
from scipy import stats

from conftest import dataset_with_fit, make_dataset
from test_double_bootstrap import brute_force_double
from test_intervals import make_draws

from mediboot.bootstrap import Scheme, resample_and_fit
from mediboot.double_bootstrap import DoubleBootConfig, run_double
from mediboot.exact_dist import (
    ExactParams,
    cdf_grid,
    exact_moments,
    gamma_hat_cdf,
    gamma_hat_quantile,
)
from mediboot.intervals import METHODS, basic, bc, bca, percentile
from mediboot.mc_harness import QUICK_PROFILE, SimConfig, make_design, run_study
from mediboot.model import fit_batch, fit_mediation
from mediboot.rng import RngStream

pytestmark = pytest.mark.acceptance

SEED = 20260826


# ---------------------------------------------------------------------------
# 1. Exact-distribution quantile


def test_acceptance_01_exact_quantile():
    t0 = time.perf_counter()
    for xtx in (99.0, 100.0):
        p = ExactParams(0.0, 0.0, 1.0, 1.0, xtx, 98)
        hi = gamma_hat_quantile(0.975, p)
        lo = gamma_hat_quantile(0.025, p)
        assert hi == pytest.approx(0.02236, abs=5e-4)
        assert lo == pytest.approx(-hi, abs=1e-6)
    assert time.perf_counter() - t0 < 5.0


# ---------------------------------------------------------------------------
# 2. Moments of the product estimate vs. large-scale simulation


def test_acceptance_02_product_moments():
    t0 = time.perf_counter()
    n = 50
    xtx = float(n - 1)
    df = n - 2
    N = 1_000_000
    gen = RngStream(SEED, path=(2,)).generator()
    for theta in (0.0, 0.14, 0.39, 0.59):
        for beta in (0.0, 0.14, 0.39, 0.59):
            p = ExactParams(theta, beta, 1.0, 1.0, xtx, df)
            prod = gen.normal(theta, p.theta_sd, size=N) * (
                beta + p.t_scale * gen.standard_t(df, size=N)
            )
            mean, var, skew = exact_moments(p)
            batches = prod.reshape(100, -1)
            se_mean = batches.mean(axis=1).std(ddof=1) / 10.0
            se_var = batches.var(axis=1, ddof=1).std(ddof=1) / 10.0
            se_skew = stats.skew(batches, axis=1).std(ddof=1) / 10.0
            assert abs(prod.mean() - mean) < 4.0 * se_mean
            assert abs(prod.var(ddof=1) - var) < 4.0 * se_var
            assert abs(stats.skew(prod) - skew) < 4.0 * se_skew
    assert time.perf_counter() - t0 < 120.0


# ---------------------------------------------------------------------------
# 3. Distributional properties of the studentized slopes


def test_acceptance_03_studentized_marginals():
    # scaled normal over an independent chi-square root is Student t
    for df in (5, 23, 48):
        gen = RngStream(SEED, path=(3, df)).generator()
        q = gen.chisquare(df, size=100_000)
        draws = gen.normal(0.0, np.sqrt(df / q))
        assert stats.kstest(draws, "t", args=(df,)).pvalue > 0.01

    # t statistics of both fitted slopes over batched regression fits
    n, theta, beta = 25, 0.39, 0.39
    R = 100_000
    x = make_design(n, RngStream(SEED, path=(3, 0)))
    gen = RngStream(SEED, path=(3, 1)).generator()
    ms = theta * x + gen.standard_normal((R, n))
    ys = beta * ms + gen.standard_normal((R, n))
    batch = fit_batch(np.broadcast_to(x, (R, n)), ms, ys)
    assert not batch.singular.any()
    t_theta = (batch.theta - theta) / np.sqrt(batch.ssv / (n - 2) / batch.sxx)
    t_beta = (batch.beta_m - beta) / np.sqrt(batch.ssu / (n - 3) / batch.ssv)
    assert stats.kstest(t_theta, "t", args=(n - 2,)).pvalue > 0.01
    assert stats.kstest(t_beta, "t", args=(n - 3,)).pvalue > 0.01
    assert abs(np.corrcoef(t_theta, t_beta)[0, 1]) < 0.01


# ---------------------------------------------------------------------------
# 4. Residual bootstrap draws track the exact distribution


def test_acceptance_04_bootstrap_exact_bridge():
    d = dataset_with_fit(100, 0.2216, 0.2477, 0.9668, 1.0913, seed=4, xtx=99.0)
    fit = fit_mediation(d)
    batch = resample_and_fit(
        d, fit, Scheme.RESIDUAL, 100_000, RngStream(SEED, path=(4,)).generator()
    )
    p = ExactParams(
        fit.theta_x_hat, fit.beta_m_hat, fit.s_v2, fit.s_u2, float(d.x @ d.x), fit.n - 2
    )
    mean, var, _ = exact_moments(p)
    grid = np.linspace(mean - 4.0 * math.sqrt(var), mean + 4.0 * math.sqrt(var), 81)
    gs = np.sort(batch.gamma)
    ecdf = np.searchsorted(gs, grid, side="right") / gs.size
    assert np.max(np.abs(ecdf - cdf_grid(grid, p))) < 0.01


# ---------------------------------------------------------------------------
# 5. Desk-scale coverage tables (shared expensive fixtures)

TOL_PP = 1.5  # binomial Monte Carlo tolerance on total percentages


def _desk_cfg(**kw):
    base = dict(schemes=("residual",), seed=SEED, **QUICK_PROFILE)
    base.update(kw)
    return SimConfig(**base)


@pytest.fixture(scope="module")
def table_null():
    return run_study(_desk_cfg(n=100, theta_x=0.0, beta_m=0.0, methods=("percentile",)))


@pytest.fixture(scope="module")
def cfg_small_effect():
    return _desk_cfg(
        n=100, theta_x=0.14, beta_m=0.14,
        methods=("percentile", "bc", "percentile_t_sobel", "percentile_d"),
    )


@pytest.fixture(scope="module")
def table_small_effect(cfg_small_effect):
    return run_study(cfg_small_effect)


@pytest.fixture(scope="module")
def table_moderate_effect_large_n():
    return run_study(_desk_cfg(n=500, theta_x=0.59, beta_m=0.59, methods=METHODS))


def test_acceptance_05a_percentile_valid_at_null(table_null):
    key = ("residual", "percentile", 0.0, 0.0, 100)
    assert table_null.total_pct(key) <= 1.0 + TOL_PP


def test_acceptance_05b_bc_liberal_small_effect(table_small_effect):
    key = ("residual", "bc", 0.14, 0.14, 100)
    assert table_small_effect.total_pct(key) >= 6.0 - TOL_PP


def test_acceptance_05c_percentile_t_liberal_small_effect(table_small_effect):
    key = ("residual", "percentile_t_sobel", 0.14, 0.14, 100)
    assert table_small_effect.total_pct(key) >= 14.0 - TOL_PP


def test_acceptance_05d_double_percentile_overcorrects(table_small_effect):
    double = table_small_effect.total_pct(("residual", "percentile_d", 0.14, 0.14, 100))
    single = table_small_effect.total_pct(("residual", "percentile", 0.14, 0.14, 100))
    assert double > single


def test_acceptance_05e_all_methods_moderate_effect(table_moderate_effect_large_n):
    for method in METHODS:
        key = ("residual", method, 0.59, 0.59, 500)
        total = table_moderate_effect_large_n.total_pct(key)
        assert 3.5 - TOL_PP <= total <= 6.5 + TOL_PP, (method, total)


# ---------------------------------------------------------------------------
# 6. Interval identities


def test_acceptance_06_interval_identities():
    gen = RngStream(SEED, path=(6,)).generator()
    # mirror identity: basic endpoints reflect percentile endpoints of the
    # draws reflected about gamma_hat
    for _ in range(1000):
        vals = gen.standard_normal(int(gen.integers(19, 400)))
        g = float(gen.standard_normal())
        level = float(gen.uniform(0.5, 0.99))
        d1 = make_draws(vals, g)
        d2 = make_draws(2.0 * g - vals, g)
        b_ci = basic(d1, level)
        p_ci = percentile(d2, level)
        assert b_ci.lower == p_ci.lower and b_ci.upper == p_ci.upper

    # zero acceleration reduces the accelerated interval to plain BC
    for _ in range(200):
        d = make_draws(gen.standard_normal(199), float(gen.standard_normal()))
        ref = bc(d, 0.95)
        acc = bca(d, 0.0, 0.95)
        assert (acc.lower, acc.upper) == (ref.lower, ref.upper)

    # zero median bias reduces BC to the percentile interval: one draw ties
    # gamma_hat and exactly half of the rest lie below it
    for _ in range(200):
        vals = np.sort(gen.standard_normal(99))
        d = make_draws(vals, float(vals[49]))
        ref = percentile(d, 0.95)
        adj = bc(d, 0.95)
        assert (adj.lower, adj.upper) == (ref.lower, ref.upper)


# ---------------------------------------------------------------------------
# 7. Calibrated interval equals the unabridged double bootstrap


def test_acceptance_07_double_bootstrap_oracle():
    for s in range(50):
        d = make_dataset(n=25, seed=SEED + s)
        variant = "percentile" if s % 2 == 0 else "basic"
        cfg = DoubleBootConfig(B=99, C=100, M=99, variant=variant)
        rng_seed = SEED + 1000 + s
        ci = run_double(d, Scheme.RESIDUAL, cfg, 0.95, RngStream(rng_seed))
        lo, hi = brute_force_double(
            d, Scheme.RESIDUAL, 99, 100, 0.95, RngStream(rng_seed), variant
        )
        assert ci.lower == lo and ci.upper == hi


# ---------------------------------------------------------------------------
# 8. Worker-count determinism of the coverage table


def test_acceptance_08_worker_determinism(cfg_small_effect, table_small_effect):
    redo = run_study(cfg_small_effect, workers=8)
    assert set(redo.rows) == set(table_small_effect.rows)
    for k in redo.rows:
        a, b = table_small_effect.rows[k], redo.rows[k]
        assert (a.left_count, a.right_count, a.fail_count, a.redraws) == (
            b.left_count, b.right_count, b.fail_count, b.redraws
        )
