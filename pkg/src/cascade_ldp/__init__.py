"""Deviation rates, exact moments and simulation of Mandelbrot cascades."""
from .cascade import (CascadeSampleBatch, sample_finite, sample_infinite, zero_mass_finite,
                      zero_mass_infinite)
from .conjugate import ConjugateResult, a_w, branch_point, conjugate_point, cramer_transform, h_cost, rho
from .devlab import DeviationReport, ldp_slope, tail_estimate, verify_suite
from .errors import (CascadeError, ConfigError, DomainError, MomentDivergence, NonConvergence,
                     ResourceError)
from .kernels import BACKEND
from .moments import (MomentTable, cascade_moments, chi, finite_tree_moments, kappa_estimate,
                      moment_upper_bound)
from .ratefn import (Breakpoints, GridParams, RateGrid, breakpoints, left_rate, moderate_rate,
                     rate_finite, rate_infinite, very_large_rate_finite, very_large_rate_infinite)
from .wmodel import (WeightModel, cgf, cgf_derivative, model_from_config, raw_moment, rng_stream,
                     sample, w_log_w_mean)

__version__ = "0.1.0"
