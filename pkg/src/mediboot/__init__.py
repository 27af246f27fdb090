"""Bootstrap confidence intervals for the indirect effect in the simple
mediation model, with the exact finite-sample distribution of the product
estimator and a Monte Carlo coverage harness."""

from .bootstrap import BootstrapDraws, Scheme, generate_draws
from .double_bootstrap import DoubleBootConfig, PValueSet, calibration_curve, run_double
from .errors import (
    DegenerateDesignError,
    InputError,
    MedibootError,
    NumericalError,
    ResourceError,
    SampleTooSmallError,
)
from .exact_dist import (
    ExactParams,
    exact_moments,
    gamma_hat_cdf,
    gamma_hat_density,
    gamma_hat_quantile,
)
from .intervals import (
    METHODS,
    ConfidenceInterval,
    basic,
    bc,
    bca,
    percentile,
    percentile_t,
)
from .mc_harness import NcrfTable, SimConfig, emit_outputs, make_design, run_study
from .model import (
    Dataset,
    JackknifeSummary,
    MediationFit,
    demean,
    fit_mediation,
    jackknife,
    sobel_se,
)
from .rng import RngStream

__version__ = "0.1.0"

__all__ = [
    "BootstrapDraws",
    "ConfidenceInterval",
    "Dataset",
    "DegenerateDesignError",
    "DoubleBootConfig",
    "ExactParams",
    "InputError",
    "JackknifeSummary",
    "METHODS",
    "MediationFit",
    "MedibootError",
    "NcrfTable",
    "NumericalError",
    "PValueSet",
    "ResourceError",
    "RngStream",
    "SampleTooSmallError",
    "Scheme",
    "SimConfig",
    "basic",
    "bc",
    "bca",
    "calibration_curve",
    "demean",
    "emit_outputs",
    "exact_moments",
    "fit_mediation",
    "gamma_hat_cdf",
    "gamma_hat_density",
    "gamma_hat_quantile",
    "generate_draws",
    "jackknife",
    "make_design",
    "percentile",
    "percentile_t",
    "run_double",
    "run_study",
    "sobel_se",
    "__version__",
]
