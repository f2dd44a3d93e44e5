"""Multivariate inverse hypergeometric (MIH) and negative multinomial (NM) laws.

Exact log-masses, support tables and samplers; the local expansion of the
MIH/NM log-ratio in powers of ``1/N``; Hellinger, total-variation, KL and
Kolmogorov distances, including cell quadrature against Gaussians; and
constructive deficiency bounds between MIH and Gaussian experiments.
"""

from .dist import (
    DEFAULT_EPSILON,
    SupportTooLargeError,
    chi_square_gof,
    enumerate_mih_support,
    exact_log_ratio,
    make_rng,
    mih_log_pmf,
    nm_log_pmf,
    sample_mih,
    sample_nm,
    truncate_mih_support,
    truncate_nm_support,
)
from .expansion import (
    ExpansionTerms,
    RegionSpec,
    expansion_residual,
    expansion_terms,
    fit_loglog_slope,
    in_region,
    residual_sweep,
)
from .experiments import (
    DeficiencyBoundReport,
    ExperimentFamily,
    KernelSpec,
    apply_jitter,
    concentration_check,
    concentration_tail,
    deficiency_upper_bound_PQ,
    deficiency_upper_bound_QP,
    normal_family_spec,
    round_pushforward,
)
from .laws import DiscreteLaw, MomentSummary, TailTooLargeError, exact_moments, point_mass
from .metrics import (
    AbsoluteContinuityError,
    DegenerateCovarianceError,
    DistanceReport,
    JitteredLaw,
    NormalSpec,
    QuadratureError,
    hellinger_discrete,
    hellinger_jittered,
    hellinger_jittered_vs_normal,
    hellinger_normals,
    kl_discrete,
    kolmogorov_discrete,
    kolmogorov_discrete_vs_normal,
    tv_discrete,
    tv_discrete_vs_rounded_normal,
    tv_jittered_vs_normal,
)
from .params import INFINITE, ModelParams, ParameterError, RegionError, ZeroMassError, lattice_N_at_least
from .special import log_factorial

__version__ = "0.1.0"
