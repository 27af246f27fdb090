"""Exact finite-sample distribution of the product estimator.

Under Gaussian errors the x->m slope estimate is normal and the m->y slope
estimate follows a location-scale Student t, independently of each other.
The product's density is their Mellin convolution,

    f(g) = integral f_theta(a) * f_beta(g/a) / |a| da,

which has no closed form and is evaluated by adaptive quadrature split at
the integrable 1/|a| singularity. The CDF is computed by conditioning on
the sign of the normal factor, which removes the singularity altogether:

    F(g) = int_{a>0} f_theta(a) F_beta(g/a) da
         + int_{a<0} f_theta(a) (1 - F_beta(g/a)) da.

The density is unbounded at g = 0 (the pointwise value is +inf); CDF and
quantiles are defined through integration and never through that point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

from .errors import InputError, NumericalError

_SQRT_2PI = math.sqrt(2.0 * math.pi)
# Quadrature budget: absolute tolerance and subinterval cap
_QUAD_EPSABS = 1e-9
_QUAD_LIMIT = 10_000


@dataclass(frozen=True)
class ExactParams:
    """Parameters (theta_x, beta_m, sigma_v^2, sigma_u^2, x'x) plus the
    degrees of freedom of the t factor (default n-2)."""

    theta_x: float
    beta_m: float
    sigma_v2: float
    sigma_u2: float
    xtx: float
    df: int

    def __post_init__(self):
        if self.sigma_v2 <= 0.0 or self.sigma_u2 <= 0.0:
            raise InputError("error variances must be strictly positive")
        if self.xtx <= 0.0:
            raise InputError("x'x must be strictly positive")
        if self.df < 3:
            raise InputError("df >= 3 required for the variance of gamma_hat to exist")

    @property
    def t_scale(self) -> float:
        """Scale of the location-scale t factor: sigma_u / (sigma_v * sqrt(df))."""
        return math.sqrt(self.sigma_u2 / (self.sigma_v2 * self.df))

    @property
    def theta_sd(self) -> float:
        return math.sqrt(self.sigma_v2 / self.xtx)


def _t_pdf_std(z, df):
    c = math.exp(
        math.lgamma((df + 1) / 2.0) - math.lgamma(df / 2.0)
    ) / math.sqrt(df * math.pi)
    return c * (1.0 + z * z / df) ** (-(df + 1) / 2.0)


def theta_hat_density(a, p: ExactParams):
    """Normal density of the x->m slope estimate: N(theta_x, sigma_v^2/x'x)."""
    sd = p.theta_sd
    z = (np.asarray(a, dtype=np.float64) - p.theta_x) / sd
    return np.exp(-0.5 * z * z) / (sd * _SQRT_2PI)


def beta_m_density(b, p: ExactParams):
    """Location-scale t density of the m->y slope estimate."""
    s = p.t_scale
    z = (np.asarray(b, dtype=np.float64) - p.beta_m) / s
    return _t_pdf_std(z, p.df) / s


def _beta_m_cdf(b, p: ExactParams):
    z = (np.asarray(b, dtype=np.float64) - p.beta_m) / p.t_scale
    return special.stdtr(p.df, z)


def _product_sd(p: ExactParams) -> float:
    if p.df >= 5:
        _, var, _ = exact_moments(p)
    else:
        # finite-second-moment surrogate for tiny df
        var = (p.theta_x**2 + p.theta_sd**2) * (p.beta_m**2 + 3 * p.t_scale**2)
    return math.sqrt(var)


def gamma_hat_density(g: float, p: ExactParams) -> float:
    """Density of the product estimate at g, by singularity-aware quadrature.

    Returns +inf at exactly g = 0, where the Mellin integral diverges
    logarithmically whenever both factor densities are positive at 0.
    """
    g = float(g)
    if g == 0.0:
        return math.inf
    sd = p.theta_sd
    loc = p.theta_x

    def integrand(a):
        if a == 0.0:
            return 0.0
        z = (a - loc) / sd
        fn = math.exp(-0.5 * z * z) / (sd * _SQRT_2PI)
        if fn == 0.0:
            return 0.0
        return fn * float(beta_m_density(g / a, p)) / abs(a)

    total = 0.0
    for lo, hi in ((-np.inf, 0.0), (0.0, np.inf)):
        val, err = integrate.quad(
            integrand, lo, hi, epsabs=_QUAD_EPSABS, epsrel=1e-10, limit=_QUAD_LIMIT
        )
        if not math.isfinite(val):
            raise NumericalError(f"product density quadrature diverged on ({lo}, {hi}) at g={g}")
        total += val
    return max(total, 0.0)


def gamma_hat_cdf(g: float, p: ExactParams) -> float:
    """CDF of the product estimate, by conditioning on the normal factor's sign."""
    g = float(g)
    sd = p.theta_sd
    loc = p.theta_x

    def pos_part(a):
        z = (a - loc) / sd
        fn = math.exp(-0.5 * z * z) / (sd * _SQRT_2PI)
        return fn * float(_beta_m_cdf(g / a, p)) if a > 0.0 and fn > 0.0 else 0.0

    def neg_part(a):
        z = (a - loc) / sd
        fn = math.exp(-0.5 * z * z) / (sd * _SQRT_2PI)
        return fn * (1.0 - float(_beta_m_cdf(g / a, p))) if a < 0.0 and fn > 0.0 else 0.0

    total = 0.0
    for f, lo, hi in ((neg_part, -np.inf, 0.0), (pos_part, 0.0, np.inf)):
        val, err = integrate.quad(
            f, lo, hi, epsabs=_QUAD_EPSABS, epsrel=1e-10, limit=_QUAD_LIMIT
        )
        if not math.isfinite(val):
            raise NumericalError(f"product CDF quadrature diverged at g={g}")
        total += val
    return min(max(total, 0.0), 1.0)


def gamma_hat_quantile(prob: float, p: ExactParams) -> float:
    """Solve gamma_hat_cdf(g) = prob by bracketing root search."""
    if not 0.0 < prob < 1.0:
        raise InputError(f"prob must lie in (0, 1), got {prob}")
    mean = p.theta_x * p.beta_m
    sd = _product_sd(p)
    lo, hi = mean - 4.0 * sd, mean + 4.0 * sd
    for _ in range(100):
        if gamma_hat_cdf(lo, p) < prob:
            break
        lo -= 4.0 * sd
    for _ in range(100):
        if gamma_hat_cdf(hi, p) > prob:
            break
        hi += 4.0 * sd
    try:
        root = optimize.brentq(
            lambda g: gamma_hat_cdf(g, p) - prob, lo, hi, xtol=1e-12, rtol=8.9e-16, maxiter=200
        )
    except ValueError as exc:
        raise NumericalError(f"quantile bracketing failed for prob={prob}") from exc
    return float(root)


def exact_moments(p: ExactParams) -> tuple[float, float, float]:
    """Mean, variance and skewness of the product estimate.

    The moment formulas use n - 4 with n inferred as df + 2, so callers
    supplying df directly get consistent results. Requires df >= 5.
    """
    if p.df < 5:
        raise InputError("exact moments need df >= 5 (n - 4 > 0)")
    n_minus_4 = p.df - 2
    mean = p.theta_x * p.beta_m
    var = (
        p.theta_x**2 * (p.sigma_u2 / p.sigma_v2) / n_minus_4
        + p.beta_m**2 * p.sigma_v2 / p.xtx
        + (p.sigma_u2 / p.xtx) / n_minus_4
    )
    third = 6.0 * p.theta_x * p.beta_m * p.sigma_u2 / (n_minus_4 * p.xtx)
    skew = third / var**1.5 if var > 0.0 else 0.0
    return mean, var, skew


def density_grid(gs: np.ndarray, p: ExactParams) -> np.ndarray:
    """Density evaluated on a grid (vector convenience for reports)."""
    return np.array([gamma_hat_density(g, p) for g in np.asarray(gs, dtype=np.float64)])


def cdf_grid(gs: np.ndarray, p: ExactParams) -> np.ndarray:
    return np.array([gamma_hat_cdf(g, p) for g in np.asarray(gs, dtype=np.float64)])
