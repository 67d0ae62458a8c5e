"""Evidential analysis of nested normal linear models.

Compares two nested linear models with the difference of Schwarz information
criteria, designs studies from budgets for misleading evidence using the
noncentral F distribution, and quantifies post-data uncertainty with
parametric and stratified bootstraps.
"""

from .bootstrap import (
    BootstrapResult,
    BootstrapSummary,
    CellLayout,
    CurvePoint,
    parametric_bootstrap,
    pseudo_true_delta_k,
    residual_bootstrap,
    sample_size_curve,
    stratified_bootstrap,
    summarize,
)
from .errors import (
    DataLoadError,
    DegenerateVarianceError,
    DomainError,
    EvidentialError,
    InsufficientDataError,
    MeanUndefinedError,
    NoSolutionError,
    NumericError,
    RankError,
    ResourceCapError,
    SearchExhaustedError,
    SpecError,
    StratificationError,
)
from .evidence import (
    EffectSpec,
    ErrorTable,
    EvidenceDesign,
    Verdict,
    classify,
    critical_delta,
    delta_k_hat,
    design_thresholds,
    f_from_delta_sic,
    misleading_probs,
    post_data_p,
    sample_size,
    threshold_tail,
)
from .io import AnalysisConfig, load_csv
from .linear_model import (
    ComparisonResult,
    ComparisonSpec,
    DesignMatrix,
    FitResult,
    MvnModel,
    NestedProjector,
    ResponseVector,
    build_two_way_design,
    compare,
    delta_sic_from_f,
    design_load,
    fit,
    kl_mvn,
    kl_nested,
    noncentrality,
    restricted_fit,
)
from .ncf import NcfParams, ncf_cdf, ncf_mean, ncf_pdf, ncf_quantile, ncf_sample, ncf_sf

__version__ = "0.1.0"
