"""OLS estimation of the simple mediation model.

The model is the recursive two-equation system

    m = theta_x * x + v
    y = beta_x * x + beta_m * m + u

with the indirect effect gamma = theta_x * beta_m. All estimation assumes
variables in deviation from their means; demeaning counts as one fitted
parameter, so the residual degrees of freedom default to n-2 for the
m-equation and n-3 for the y-equation (overridable for sensitivity checks).

The two-regressor system is solved through explicit 2x2 normal equations.
Batched variants operate on (R, n) arrays of resampled datasets and are the
workhorse of the bootstrap and Monte Carlo modules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDesignError, InputError, SampleTooSmallError

# Relative determinant guard for the 2x2 normal equations
_DET_GUARD = 1e-12


@dataclass(frozen=True)
class Dataset:
    """Observed triples (x, m, y) of common length n."""

    x: np.ndarray
    m: np.ndarray
    y: np.ndarray
    demeaned: bool = False

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        m = np.asarray(self.m, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if not (x.ndim == m.ndim == y.ndim == 1):
            raise InputError("x, m, y must be one-dimensional")
        if not (len(x) == len(m) == len(y)):
            raise InputError(
                f"length mismatch: len(x)={len(x)}, len(m)={len(m)}, len(y)={len(y)}"
            )
        if len(x) < 5:
            raise SampleTooSmallError(f"need n >= 5 observations, got {len(x)}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "y", y)
        if self.demeaned:
            scale = max(abs(v).max(initial=0.0) for v in (x, m, y))
            tol = 1e-10 * len(x) * max(scale, 1.0)
            for name, v in (("x", x), ("m", m), ("y", y)):
                if abs(v.sum()) > tol:
                    raise InputError(f"{name} marked demeaned but sums to {v.sum():g}")

    @property
    def n(self) -> int:
        return len(self.x)


def demean(d: Dataset) -> Dataset:
    """Return a copy of the dataset with each vector centered at zero."""
    return Dataset(
        d.x - d.x.mean(),
        d.m - d.m.mean(),
        d.y - d.y.mean(),
        demeaned=True,
    )


@dataclass(frozen=True)
class MediationFit:
    """OLS estimates, residuals and scale statistics for one dataset."""

    theta_x_hat: float
    beta_x_hat: float
    beta_m_hat: float
    gamma_hat: float
    s_v2: float
    s_u2: float
    se_theta_x: float
    se_beta_m: float
    v_hat: np.ndarray
    u_hat: np.ndarray
    xtx: float
    n: int
    df_v: int
    df_u: int


def fit_mediation(d: Dataset, df_v: int | None = None, df_u: int | None = None) -> MediationFit:
    """Fit both equations by OLS on a demeaned dataset.

    ``df_v``/``df_u`` override the residual degrees of freedom (defaults
    n-2 and n-3, counting the demeaning as one fitted parameter).
    """
    if not d.demeaned:
        raise InputError("fit_mediation requires a demeaned Dataset; call demean() first")
    n = d.n
    x, m, y = d.x, d.m, d.y
    df_v = n - 2 if df_v is None else int(df_v)
    df_u = n - 3 if df_u is None else int(df_u)
    if df_v <= 0 or df_u <= 0:
        raise SampleTooSmallError(f"nonpositive residual degrees of freedom at n={n}")

    sxx = float(x @ x)
    if sxx <= 0.0:
        raise DegenerateDesignError("x has zero sum of squares")
    sxm = float(x @ m)
    sxy = float(x @ y)
    smm = float(m @ m)
    smy = float(m @ y)
    syy = float(y @ y)

    theta = sxm / sxx
    det = sxx * smm - sxm * sxm
    if det <= _DET_GUARD * max(sxx * smm, 1.0):
        raise DegenerateDesignError("(x, m) cross-product matrix is singular; m collinear with x")
    beta_x = (smm * sxy - sxm * smy) / det
    beta_m = (sxx * smy - sxm * sxy) / det

    v_hat = m - theta * x
    u_hat = y - beta_x * x - beta_m * m
    ssv = float(v_hat @ v_hat)
    ssu = float(u_hat @ u_hat)
    s_v2 = ssv / df_v
    s_u2 = ssu / df_u
    # Var(beta_m_hat) = s_u^2 / (m' M_x m) and m' M_x m = v_hat'v_hat
    se_beta_m = math.sqrt(s_u2 / ssv) if ssv > 0.0 else 0.0

    return MediationFit(
        theta_x_hat=theta,
        beta_x_hat=beta_x,
        beta_m_hat=beta_m,
        gamma_hat=theta * beta_m,
        s_v2=s_v2,
        s_u2=s_u2,
        se_theta_x=math.sqrt(s_v2 / sxx),
        se_beta_m=se_beta_m,
        v_hat=v_hat,
        u_hat=u_hat,
        xtx=sxx,
        n=n,
        df_v=df_v,
        df_u=df_u,
    )


def sobel_se(fit: MediationFit) -> float:
    """Delta-method (Sobel) standard error of gamma_hat.

    Both standard errors enter squared: sqrt(theta^2 SE(beta_m)^2 +
    beta_m^2 SE(theta)^2).
    """
    return math.sqrt(
        fit.theta_x_hat**2 * fit.se_beta_m**2 + fit.beta_m_hat**2 * fit.se_theta_x**2
    )


@dataclass(frozen=True)
class JackknifeSummary:
    """Leave-one-out gamma estimates and derived quantities."""

    leave_one_out: np.ndarray
    mean_loo: float
    se_jack: float
    accel: float
    degenerate: bool = False


def jackknife(d: Dataset) -> JackknifeSummary:
    """Leave-one-out gammas, jackknife SE and the acceleration constant.

    Each subsample is re-demeaned before fitting (demeaning is part of
    estimation). When all leave-one-out values coincide the acceleration
    is undefined; it is reported as 0 with ``degenerate=True``.
    """
    if d.n < 6:
        raise SampleTooSmallError(f"jackknife needs n >= 6, got {d.n}")
    dd = d if d.demeaned else demean(d)
    loo = _jackknife_gammas(dd.x[None, :], dd.m[None, :], dd.y[None, :])[0]
    n = d.n
    mean_loo = float(loo.mean())
    dev = mean_loo - loo
    ss2 = float((dev**2).sum())
    se_jack = math.sqrt((n - 1) / n * ss2)
    scale = max(abs(loo).max(), 1.0)
    if ss2 <= (1e-14 * scale) ** 2 * n:
        return JackknifeSummary(loo, mean_loo, se_jack, 0.0, degenerate=True)
    accel = float((dev**3).sum()) / (6.0 * ss2**1.5)
    return JackknifeSummary(loo, mean_loo, se_jack, accel, degenerate=False)


# ---------------------------------------------------------------------------
# Batched kernels on (R, n) arrays. Rows are independent datasets; every row
# is demeaned in place of an explicit re-demeaning step.
# ---------------------------------------------------------------------------


@dataclass
class BatchFit:
    """Per-row estimates for a batch of datasets (all arrays length R)."""

    theta: np.ndarray
    beta_x: np.ndarray
    beta_m: np.ndarray
    gamma: np.ndarray
    ssv: np.ndarray
    ssu: np.ndarray
    sxx: np.ndarray
    singular: np.ndarray  # boolean mask of rows that failed the determinant guard
    n: int = 0
    redraws: int = 0
    x: np.ndarray | None = None  # demeaned inputs, kept on request
    m: np.ndarray | None = None
    y: np.ndarray | None = None

    def sobel_se(self, df_v: int, df_u: int) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            var_theta = (self.ssv / df_v) / self.sxx
            var_beta = np.where(self.ssv > 0.0, (self.ssu / df_u) / self.ssv, 0.0)
        return np.sqrt(self.theta**2 * var_beta + self.beta_m**2 * var_theta)


def fit_batch(x: np.ndarray, m: np.ndarray, y: np.ndarray, keep_data: bool = False) -> BatchFit:
    """Demean and fit every row of (R, n) arrays via 2x2 normal equations."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    x = x - x.mean(axis=1, keepdims=True)
    m = m - m.mean(axis=1, keepdims=True)
    y = y - y.mean(axis=1, keepdims=True)

    sxx = np.einsum("ij,ij->i", x, x)
    sxm = np.einsum("ij,ij->i", x, m)
    sxy = np.einsum("ij,ij->i", x, y)
    smm = np.einsum("ij,ij->i", m, m)
    smy = np.einsum("ij,ij->i", m, y)
    syy = np.einsum("ij,ij->i", y, y)

    det = sxx * smm - sxm * sxm
    singular = det <= _DET_GUARD * np.maximum(sxx * smm, 1.0)
    safe_det = np.where(singular, 1.0, det)
    safe_sxx = np.where(sxx > 0.0, sxx, 1.0)

    theta = sxm / safe_sxx
    beta_x = (smm * sxy - sxm * smy) / safe_det
    beta_m = (sxx * smy - sxm * sxy) / safe_det
    ssv = np.maximum(smm - sxm * sxm / safe_sxx, 0.0)
    ssu = np.maximum(syy - beta_x * sxy - beta_m * smy, 0.0)

    return BatchFit(
        theta=theta,
        beta_x=beta_x,
        beta_m=beta_m,
        gamma=theta * beta_m,
        ssv=ssv,
        ssu=ssu,
        sxx=sxx,
        singular=singular,
        n=x.shape[1],
        x=x if keep_data else None,
        m=m if keep_data else None,
        y=y if keep_data else None,
    )


def _jackknife_gammas(x: np.ndarray, m: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Leave-one-out gammas for each row of demeaned (R, n) arrays.

    Uses cross-product downdating: removing observation i from a centered
    vector pair (p, q) changes the centered cross product by
    -p_i q_i * n/(n-1), which covers the re-demeaning of the subsample.
    Returns an (R, n) array.
    """
    n = x.shape[1]
    c = n / (n - 1)
    sxx = np.einsum("ij,ij->i", x, x)[:, None] - c * x * x
    sxm = np.einsum("ij,ij->i", x, m)[:, None] - c * x * m
    sxy = np.einsum("ij,ij->i", x, y)[:, None] - c * x * y
    smm = np.einsum("ij,ij->i", m, m)[:, None] - c * m * m
    smy = np.einsum("ij,ij->i", m, y)[:, None] - c * m * y

    det = sxx * smm - sxm * sxm
    bad = (det <= _DET_GUARD * np.maximum(sxx * smm, 1.0)) | (sxx <= 0.0)
    if bad.any():
        raise DegenerateDesignError("a leave-one-out subsample has a singular design")
    theta = sxm / sxx
    beta_m = (sxx * smy - sxm * sxy) / det
    return theta * beta_m


def jackknife_se_batch(fit: BatchFit) -> np.ndarray:
    """Jackknife SE of gamma for every row of a batch fitted with keep_data."""
    if fit.x is None:
        raise InputError("jackknife_se_batch needs a BatchFit built with keep_data=True")
    loo = _jackknife_gammas(fit.x, fit.m, fit.y)
    n = fit.n
    dev = loo.mean(axis=1, keepdims=True) - loo
    return np.sqrt((n - 1) / n * np.einsum("ij,ij->i", dev, dev))
