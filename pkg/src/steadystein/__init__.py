"""Exact steady states of many-server queues and their diffusion approximations."""
from .birth_death import LatticeDist, cdf, pmf_at, scaled_moment, stationary, tail_prob
from .coxian import C2Dist, mphn_c2_stationary
from .diffusion1d import DensityCurve, build_density, density_cdf, density_moment, interval_prob
from .errors import (InvalidPhaseType, NumericError, PreconditionError, StabilityError,
                     SteadySteinError, TruncationError)
from .metrics import kolmogorov, moment_error, pmf_sup_error, tail_ratio_error, wasserstein1
from .models import CONSTANT, STATE_DEPENDENT, QueueParams, diff_coeff, drift, fluid_equilibrium

__version__ = "0.1.0"

__all__ = [
    "CONSTANT", "STATE_DEPENDENT", "QueueParams", "fluid_equilibrium", "drift", "diff_coeff",
    "LatticeDist", "stationary", "scaled_moment", "tail_prob", "pmf_at", "cdf",
    "C2Dist", "mphn_c2_stationary",
    "DensityCurve", "build_density", "density_moment", "density_cdf", "interval_prob",
    "wasserstein1", "kolmogorov", "pmf_sup_error", "tail_ratio_error", "moment_error",
    "SteadySteinError", "StabilityError", "PreconditionError", "TruncationError",
    "NumericError", "InvalidPhaseType",
]
