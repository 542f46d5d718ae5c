"""Conditional c.d.f. estimation from current-status data by penalized tensor-product least squares."""
from .basis import Interval, PiecewisePoly, Trigonometric, eval_basis, make_basis
from .errors import ConfigError, CurstatError, EvaluationError, InputFormatError, NumericalError
from .rearrange import SliceFunction, rearrange_estimator, rearrange_slice
from .risk import empirical_norm_sq, l2_risk, nu_n_diagnostic, rate_fit, risk_study
from .selection import CollectionSpec, build_collection, clamp, select
from .simgen import GammaParams, SimDesign, dist_a, gamma_cdf, gamma_sample, generate, true_cdf
from .tensor_ls import FittedModel, Sample, TensorModel, assemble_system, evaluate, fit, solve_least_squares, tensor_model

__version__ = "0.1.0"
