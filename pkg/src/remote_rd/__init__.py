"""Rate-region bounds for a Gaussian vector source observed through noisy encoders.

The hidden source X has covariance ``cov_x``; encoder i sees
``Y_i = X_i + N_i`` with noise variance ``sigma2_i`` and the decoder wants
total squared error at most D. Rates are in nats throughout the API.
"""

__version__ = "0.1.0"

from .errors import DegenerateSpectrum, Infeasible, InvalidInput, NotApplicable, RemoteRDError
from .linalg import (
    SpectralDecomp,
    det_uniform_offdiag,
    eig_sensitivity,
    eig_sym,
    secular_eig_bordered,
    secular_eig_equicorr,
)
from .matching import (
    MatchingReport,
    check_corollary4,
    check_lemma3,
    check_md_sampled,
    check_theorem4,
    check_theorem6,
    check_theorem7,
    check_theorem8_window,
    check_theorem9,
    run_all_checks,
    theorem8_closed_form,
    theorem9_curve,
)
from .model import (
    SourceSpec,
    build_circulant4,
    build_equicorrelated,
    info_matrix,
    load_model,
    mmse_trace,
    r_star,
    scale_to_boundary,
)
from .region import (
    RegionBound,
    all_endpoints,
    endpoint,
    inner_bound,
    j_inner,
    j_outer,
    outer_bound,
    parametric_curve,
    point_in_bound,
    sum_rate_lower_cyclic,
    sum_rate_min,
)
from .waterfill import WaterfillResult, log_theta, theta, waterfill

__all__ = [
    "DegenerateSpectrum", "Infeasible", "InvalidInput", "NotApplicable", "RemoteRDError",
    "SpectralDecomp", "det_uniform_offdiag", "eig_sensitivity", "eig_sym",
    "secular_eig_bordered", "secular_eig_equicorr",
    "MatchingReport", "check_corollary4", "check_lemma3", "check_md_sampled", "check_theorem4",
    "check_theorem6", "check_theorem7", "check_theorem8_window", "check_theorem9",
    "run_all_checks", "theorem8_closed_form", "theorem9_curve",
    "SourceSpec", "build_circulant4", "build_equicorrelated", "info_matrix", "load_model",
    "mmse_trace", "r_star", "scale_to_boundary",
    "RegionBound", "all_endpoints", "endpoint", "inner_bound", "j_inner", "j_outer",
    "outer_bound", "parametric_curve", "point_in_bound", "sum_rate_lower_cyclic", "sum_rate_min",
    "WaterfillResult", "log_theta", "theta", "waterfill",
]
