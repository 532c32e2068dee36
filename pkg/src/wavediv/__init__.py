"""Wavelet plug-in estimation of phi-divergences with asymptotic inference."""

__version__ = "0.1.0"

from .density import (
    SampleSet,
    WaveletDensityEstimate,
    eval_density,
    fit_density,
    read_samples,
    resolution_level,
    sigma_hn,
    sup_distance,
    wavelet_empirical_process,
)
from .errors import (
    DegenerateVarianceError,
    EmptyDomainError,
    InfiniteDivergenceError,
    MalformedFilterError,
    QuadratureError,
    QuadratureResolutionWarning,
    UnsupportedPairError,
    WaveDivError,
)
from .functionals import (
    Domain,
    PhiFunctional,
    besov_seminorm,
    divergence,
    finalize,
    phi_functional,
    symmetrized_divergence,
    trim_domain,
)
from .inference import (
    EstimateReport,
    VarianceEstimate,
    closed_form_variance,
    confidence_interval,
    delta_method,
    estimate_divergence,
    h_functions,
    p_value,
    plug_in_variance,
    rate_bound_constants,
    standardized_statistic,
)
from .oracles import (
    Distribution,
    beta_I_alpha,
    closed_form_divergence,
    parse_distribution,
    quadrature_oracle,
    sample,
)
from .quadrature import QuadratureRule
from .wavelets import (
    FAMILIES,
    ScalingFilter,
    ScalingFunctionTable,
    build_scaling_table,
    eval_scaling,
    get_filter,
    kernel,
    kernel_at_level,
    load_filter,
    project,
)
