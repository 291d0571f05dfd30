"""Simulation and bounds for classifying Gaussian subspace classes from noisy linear features."""
from .bounds import (
    DdtCurve,
    DdtKind,
    GaussianPair,
    bhattacharyya_bound,
    bhattacharyya_distance,
    c_affine_bounds,
    c_linear_bounds,
    ddt_eval,
    predicted_classes,
    wishart_min_eig_limit,
)
from .ensemble import (
    FeatureMatrix,
    InvalidDimensionError,
    RngStream,
    ScalingParams,
    SubspaceClass,
    dims_for,
    draw_affine_class,
    draw_feature_matrix,
    draw_linear_class,
    num_classes_for,
    sample_signal,
    sample_signals,
)
from .estimates import ErrorEstimate
from .experiments import (
    InsufficientDataError,
    SweepConfig,
    SweepMode,
    SweepRow,
    estimate_error,
    fit_slope,
    run_capacity_sweep,
    run_ddt_sweep,
)
from .gauss_classifier import (
    ClassBank,
    ClassificationResult,
    ProjectedClass,
    classify,
    classify_batch,
    log_likelihood,
    pairwise_error_mc,
    project_class,
)

__version__ = "0.1.0"
