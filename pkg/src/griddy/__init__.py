"""Grid-based Gibbs sampling with verifiable kernels.

Samplers that draw each coordinate from an interpolated, clamped
approximation of its full conditional, plus the machinery to check them:
closed-form targets, discretized transition kernels with invariant-measure
and perturbation reports, and ECDF/autocorrelation diagnostics.
"""

from .conditional import (
    ApproxConditional,
    ClampBounds,
    Grid1D,
    InterpScheme,
    RelativeClamp,
    build_conditional,
    build_from_values,
    eval_cdf,
    eval_density,
    sample_inverse_cdf,
)
from .diagnostics import (
    AcfSeries,
    EcdfTable,
    StudyResult,
    StudyRow,
    autocorrelation,
    cdf_distance,
    ecdf,
    grid_convergence_study,
)
from .errors import (
    DegenerateConditionalError,
    DomainError,
    EvaluationError,
    GriddyError,
    GridMismatchError,
    ReducibilityError,
    StateSpaceError,
    TailBoundError,
    UnsupportedTargetError,
    ZeroVarianceError,
)
from .kernel_lab import (
    InvariantMeasure,
    KernelMatrix,
    PerturbationReport,
    RegularityReport,
    StateGrid,
    TruncationBoundReport,
    discretize_gibbs_kernel,
    discretize_griddy_kernel,
    discretize_metropolized_kernel,
    doeblin_constant,
    fixed_space_dimension,
    invariant_measure,
    kernel_lp,
    perturbation_report,
    regularity_check,
    spectral_gap_alpha,
    truncation_bound_report,
    tv_convergence,
    vector_lp,
)
from .rng import SLOT_WIDTH, uniform_slots
from .samplers import (
    ChainConfig,
    ChainOutput,
    estimate_expectation,
    gibbs_chain,
    griddy_chain,
    metropolized_griddy_chain,
)
from .targets import (
    BoxDomain,
    TargetDensity,
    TruncationSpec,
    beta_mixture_2d,
    linear_trend_model,
    load_time_series_csv,
    piecewise_linear_density,
    residual_posterior,
    truncate,
)

__version__ = "0.1.0"

__all__ = [
    "ApproxConditional",
    "ClampBounds",
    "Grid1D",
    "InterpScheme",
    "RelativeClamp",
    "build_conditional",
    "build_from_values",
    "eval_cdf",
    "eval_density",
    "sample_inverse_cdf",
    "AcfSeries",
    "EcdfTable",
    "StudyResult",
    "StudyRow",
    "autocorrelation",
    "cdf_distance",
    "ecdf",
    "grid_convergence_study",
    "DegenerateConditionalError",
    "DomainError",
    "EvaluationError",
    "GriddyError",
    "GridMismatchError",
    "ReducibilityError",
    "StateSpaceError",
    "TailBoundError",
    "UnsupportedTargetError",
    "ZeroVarianceError",
    "InvariantMeasure",
    "KernelMatrix",
    "PerturbationReport",
    "RegularityReport",
    "StateGrid",
    "TruncationBoundReport",
    "discretize_gibbs_kernel",
    "discretize_griddy_kernel",
    "discretize_metropolized_kernel",
    "doeblin_constant",
    "fixed_space_dimension",
    "invariant_measure",
    "kernel_lp",
    "perturbation_report",
    "regularity_check",
    "spectral_gap_alpha",
    "truncation_bound_report",
    "tv_convergence",
    "vector_lp",
    "SLOT_WIDTH",
    "uniform_slots",
    "ChainConfig",
    "ChainOutput",
    "estimate_expectation",
    "gibbs_chain",
    "griddy_chain",
    "metropolized_griddy_chain",
    "BoxDomain",
    "TargetDensity",
    "TruncationSpec",
    "beta_mixture_2d",
    "linear_trend_model",
    "load_time_series_csv",
    "piecewise_linear_density",
    "residual_posterior",
    "truncate",
    "__version__",
]
