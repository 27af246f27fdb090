"""First-level bootstrap replication of the indirect-effect estimate.

Three resampling schemes: paired (rows with replacement), residual
(rescaled OLS residuals fed back through the fitted system) and parametric
(Gaussian errors at the estimated variances). The residual and parametric
schemes condition on x by keeping it fixed. Every resample is re-demeaned
before fitting, which the batched fitting kernel does per row.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InputError, ResourceError
from .model import (
    BatchFit,
    Dataset,
    MediationFit,
    demean,
    fit_batch,
    fit_mediation,
    jackknife_se_batch,
)
from .rng import RngStream

_MAX_REDRAWS = 100


class Scheme(str, Enum):
    PAIRED = "paired"
    RESIDUAL = "residual"
    PARAMETRIC = "parametric"


@dataclass(frozen=True)
class BootstrapDraws:
    """First-level replicates of gamma_hat.

    ``gamma_star`` is sorted ascending. ``tau_star`` (if present) is kept in
    the original draw order; ``draw_order`` maps sorted position -> original
    index so the gamma*-tau* pairing survives the sort.
    """

    gamma_star: np.ndarray
    gamma_hat: float
    B: int
    se_kind: str = "none"  # sobel | jackknife | none
    tau_star: np.ndarray | None = None
    draw_order: np.ndarray | None = None
    redraws: int = 0


def rescaled_residuals(fit: MediationFit) -> tuple[np.ndarray, np.ndarray]:
    """Residual pools sqrt(n/(n-2)) v_hat and sqrt(n/(n-3)) u_hat."""
    n = fit.n
    return (
        np.sqrt(n / (n - 2)) * fit.v_hat,
        np.sqrt(n / (n - 3)) * fit.u_hat,
    )


def paired_resample(d: Dataset, rng: RngStream) -> Dataset:
    """Draw n rows i.i.d. uniformly with replacement; rows stay intact."""
    idx = rng.generator().integers(0, d.n, size=d.n)
    return Dataset(d.x[idx], d.m[idx], d.y[idx], demeaned=False)


def residual_resample(fit: MediationFit, d: Dataset, rng: RngStream) -> Dataset:
    """Resample rescaled residuals and rebuild (m*, y*) with x fixed."""
    if not d.demeaned:
        raise InputError("residual resampling requires a demeaned dataset")
    gen = rng.generator()
    v_pool, u_pool = rescaled_residuals(fit)
    v_star = v_pool[gen.integers(0, d.n, size=d.n)]
    u_star = u_pool[gen.integers(0, d.n, size=d.n)]
    m_star = fit.theta_x_hat * d.x + v_star
    y_star = fit.beta_x_hat * d.x + fit.beta_m_hat * m_star + u_star
    return demean(Dataset(d.x, m_star, y_star))


def parametric_resample(fit: MediationFit, d: Dataset, rng: RngStream) -> Dataset:
    """Same construction with u*, v* drawn from N(0, s_u^2), N(0, s_v^2)."""
    if not d.demeaned:
        raise InputError("parametric resampling requires a demeaned dataset")
    gen = rng.generator()
    v_star = gen.normal(0.0, np.sqrt(fit.s_v2), size=d.n)
    u_star = gen.normal(0.0, np.sqrt(fit.s_u2), size=d.n)
    m_star = fit.theta_x_hat * d.x + v_star
    y_star = fit.beta_x_hat * d.x + fit.beta_m_hat * m_star + u_star
    return demean(Dataset(d.x, m_star, y_star))


def _resample_block(
    scheme: Scheme,
    x: np.ndarray,
    m: np.ndarray,
    y: np.ndarray,
    fit_vals: tuple[float, float, float, float, float],
    pools: tuple[np.ndarray, np.ndarray] | None,
    count: int,
    gen: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Generate ``count`` resampled datasets as (count, n) arrays.

    ``fit_vals`` is (theta, beta_x, beta_m, s_v2, s_u2) of the source fit;
    ``pools`` holds the rescaled residual vectors for the residual scheme.
    """
    n = len(x)
    if scheme is Scheme.PAIRED:
        idx = gen.integers(0, n, size=(count, n))
        return x[idx], m[idx], y[idx]
    theta, beta_x, beta_m, s_v2, s_u2 = fit_vals
    if scheme is Scheme.RESIDUAL:
        v_pool, u_pool = pools
        v_star = v_pool[gen.integers(0, n, size=(count, n))]
        u_star = u_pool[gen.integers(0, n, size=(count, n))]
    else:
        v_star = gen.normal(0.0, np.sqrt(s_v2), size=(count, n))
        u_star = gen.normal(0.0, np.sqrt(s_u2), size=(count, n))
    m_star = theta * x + v_star
    y_star = beta_x * x + beta_m * m_star + u_star
    return np.broadcast_to(x, (count, n)).copy(), m_star, y_star


def resample_and_fit(
    d: Dataset,
    fit: MediationFit,
    scheme: Scheme,
    count: int,
    gen: np.random.Generator,
    keep_data: bool = False,
) -> BatchFit:
    """Draw ``count`` resamples, fit each, redrawing singular designs.

    Singular resamples (possible under the paired scheme) are replaced with
    fresh draws from the same stream, up to a retry cap; the number of
    redraws is recorded on the returned batch.
    """
    fit_vals = (fit.theta_x_hat, fit.beta_x_hat, fit.beta_m_hat, fit.s_v2, fit.s_u2)
    pools = rescaled_residuals(fit) if scheme is Scheme.RESIDUAL else None
    xs, ms, ys = _resample_block(scheme, d.x, d.m, d.y, fit_vals, pools, count, gen)
    batch = fit_batch(xs, ms, ys, keep_data=keep_data)
    redraws = 0
    for _ in range(_MAX_REDRAWS):
        bad = np.flatnonzero(batch.singular)
        if bad.size == 0:
            break
        redraws += bad.size
        nx, nm, ny = _resample_block(scheme, d.x, d.m, d.y, fit_vals, pools, bad.size, gen)
        sub = fit_batch(nx, nm, ny, keep_data=keep_data)
        for name in ("theta", "beta_x", "beta_m", "gamma", "ssv", "ssu", "sxx", "singular"):
            getattr(batch, name)[bad] = getattr(sub, name)
        if keep_data:
            batch.x[bad] = sub.x
            batch.m[bad] = sub.m
            batch.y[bad] = sub.y
    else:
        raise ResourceError(f"still {int(batch.singular.sum())} singular resamples after retry cap")
    batch.redraws = redraws
    return batch


def generate_draws(
    d: Dataset,
    scheme: Scheme,
    B: int,
    studentize: str = "none",
    rng: RngStream | None = None,
) -> BootstrapDraws:
    """Run B resample-fit cycles; optionally attach studentized roots."""
    if B < 19:
        raise InputError(f"need B >= 19 bootstrap draws, got {B}")
    if studentize not in ("none", "sobel", "jackknife"):
        raise InputError(f"unknown studentize kind {studentize!r}")
    if rng is None:
        raise InputError("an RngStream is required")
    dd = d if d.demeaned else demean(d)
    fit = fit_mediation(dd)
    keep = studentize == "jackknife"
    batch = resample_and_fit(dd, fit, Scheme(scheme), B, rng.generator(), keep_data=keep)
    return draws_from_batch(batch, fit, studentize)


def draws_from_batch(batch: BatchFit, fit: MediationFit, studentize: str) -> BootstrapDraws:
    """Package a fitted resample batch as sorted BootstrapDraws."""
    gamma = batch.gamma
    tau = None
    if studentize != "none":
        if studentize == "sobel":
            se_star = batch.sobel_se(fit.n - 2, fit.n - 3)
        else:
            se_star = jackknife_se_batch(batch)
        with np.errstate(divide="ignore", invalid="ignore"):
            tau = np.where(se_star > 0.0, (gamma - fit.gamma_hat) / se_star, 0.0)
    order = np.argsort(gamma, kind="stable")
    return BootstrapDraws(
        gamma_star=gamma[order],
        gamma_hat=fit.gamma_hat,
        B=len(gamma),
        se_kind=studentize,
        tau_star=tau,
        draw_order=order,
        redraws=getattr(batch, "redraws", 0),
    )
