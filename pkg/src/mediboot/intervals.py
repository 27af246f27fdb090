"""Single-bootstrap confidence intervals for the indirect effect.

Five constructions from one set of bootstrap replicates: basic (hybrid),
percentile, bias-corrected (BC), bias-corrected and accelerated (BCa) and
percentile-t. Quantiles use the (B+1) order-statistic rule throughout,
with no interpolation: k = round(prob * (B+1)) clamped to [1, B].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .bootstrap import BootstrapDraws
from .errors import DegenerateDesignError, InputError

METHODS = (
    "basic",
    "percentile",
    "bc",
    "bca",
    "percentile_t_sobel",
    "percentile_t_jack",
    "percentile_d",
    "basic_d",
)


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    method: str
    nominal_level: float
    alpha1: float  # quantile probabilities actually used
    alpha2: float
    tail_rank_valid: bool | None = None  # set by the double bootstrap only

    def __post_init__(self):
        if self.method not in METHODS:
            raise InputError(f"unknown interval method {self.method!r}")


def _norm_ppf(p: float) -> float:
    return float(special.ndtri(p))


def _norm_cdf(z: float) -> float:
    return float(special.ndtr(z))


def order_quantile(sorted_vals: np.ndarray, prob: float) -> float:
    """k-th order statistic with k = round(prob * (B+1)), no interpolation."""
    if not 0.0 < prob < 1.0:
        raise InputError(f"prob must lie in (0, 1), got {prob}")
    b = len(sorted_vals)
    if b < 19:
        raise InputError(f"need at least 19 values, got {b}")
    k = int(math.floor(prob * (b + 1) + 0.5))
    k = min(max(k, 1), b)
    return float(sorted_vals[k - 1])


def basic(draws: BootstrapDraws, level: float) -> ConfidenceInterval:
    """Basic (hybrid) interval: (2g - g*_{1-a/2}, 2g - g*_{a/2})."""
    a = 1.0 - level
    g = draws.gamma_hat
    lo = 2.0 * g - order_quantile(draws.gamma_star, 1.0 - a / 2.0)
    hi = 2.0 * g - order_quantile(draws.gamma_star, a / 2.0)
    return ConfidenceInterval(lo, hi, "basic", level, a / 2.0, 1.0 - a / 2.0)


def percentile(draws: BootstrapDraws, level: float) -> ConfidenceInterval:
    a = 1.0 - level
    lo = order_quantile(draws.gamma_star, a / 2.0)
    hi = order_quantile(draws.gamma_star, 1.0 - a / 2.0)
    return ConfidenceInterval(lo, hi, "percentile", level, a / 2.0, 1.0 - a / 2.0)


def z0(draws: BootstrapDraws) -> float:
    """Normal-units median bias of the bootstrap distribution.

    Ties with gamma_hat count as half; the proportion is clamped to
    [1/(B+1), B/(B+1)] so the inverse normal stays finite.
    """
    gs = draws.gamma_star
    b = draws.B
    below = float(np.count_nonzero(gs < draws.gamma_hat))
    ties = float(np.count_nonzero(gs == draws.gamma_hat))
    prop = (below + 0.5 * ties) / b
    prop = min(max(prop, 1.0 / (b + 1)), b / (b + 1.0))
    return _norm_ppf(prop)


def bc(draws: BootstrapDraws, level: float) -> ConfidenceInterval:
    """Bias-corrected percentile interval (BCa with acceleration 0)."""
    a = 1.0 - level
    zhat = z0(draws)
    a1 = _norm_cdf(2.0 * zhat + _norm_ppf(a / 2.0))
    a2 = _norm_cdf(2.0 * zhat + _norm_ppf(1.0 - a / 2.0))
    lo = order_quantile(draws.gamma_star, a1)
    hi = order_quantile(draws.gamma_star, a2)
    return ConfidenceInterval(lo, hi, "bc", level, a1, a2)


def bca(draws: BootstrapDraws, accel: float, level: float) -> ConfidenceInterval:
    """Bias-corrected and accelerated interval."""
    if not math.isfinite(accel):
        raise InputError("acceleration constant must be finite")
    a = 1.0 - level
    zhat = z0(draws)
    probs = []
    for z_tail in (_norm_ppf(a / 2.0), _norm_ppf(1.0 - a / 2.0)):
        denom = 1.0 - accel * (zhat + z_tail)
        if abs(denom) < 1e-8:
            raise DegenerateDesignError("BCa denominator vanishes; acceleration degenerate")
        probs.append(_norm_cdf(zhat + (zhat + z_tail) / denom))
    a1, a2 = probs
    lo = order_quantile(draws.gamma_star, a1)
    hi = order_quantile(draws.gamma_star, a2)
    return ConfidenceInterval(lo, hi, "bca", level, a1, a2)


def percentile_t(draws: BootstrapDraws, se_hat: float, level: float) -> ConfidenceInterval:
    """Studentized-root interval: (g - t*_{1-a/2} SE, g - t*_{a/2} SE)."""
    if draws.tau_star is None:
        raise InputError("draws carry no studentized roots; regenerate with studentize set")
    method = "percentile_t_jack" if draws.se_kind == "jackknife" else "percentile_t_sobel"
    a = 1.0 - level
    g = draws.gamma_hat
    if se_hat == 0.0:
        return ConfidenceInterval(g, g, method, level, a / 2.0, 1.0 - a / 2.0)
    if se_hat < 0.0:
        raise InputError("se_hat must be nonnegative")
    tau_sorted = np.sort(draws.tau_star)
    lo = g - order_quantile(tau_sorted, 1.0 - a / 2.0) * se_hat
    hi = g - order_quantile(tau_sorted, a / 2.0) * se_hat
    return ConfidenceInterval(lo, hi, method, level, a / 2.0, 1.0 - a / 2.0)
