"""Gradient-walk sampling and basin-of-attraction analysis of feed-forward
network loss landscapes.

The package samples a network's weight space with progressive gradient
walks, records loss-gradient clouds with Hessian-eigenvalue curvature
labels, and quantifies basins of attraction through the n_stag / l_stag
stagnation metrics.
"""

from .data import (
    BENCHMARKS,
    BatchSampler,
    Benchmark,
    CsvSchema,
    DatasetSplit,
    RawDataset,
    Standardisation,
    encode_targets,
    load_csv,
    load_mnist_idx,
    prepare_problem,
    resolve_benchmark,
    split_dataset,
    standardise,
    xor_dataset,
)
from .exceptions import (
    AllWalksFailedError,
    CapabilityError,
    DataFormatError,
    DimensionError,
    LosswalkError,
    NumericError,
    UsageError,
)
from .experiment import (
    ExperimentConfig,
    LGCloudRecord,
    RunResult,
    classification_accuracy,
    emit_lg_cloud,
    predicted_classes,
    read_lg_cloud,
    records_from_traces,
    run_experiment,
    summarise_run,
)
from .network import (
    CurvatureClass,
    LossKind,
    NetworkSpec,
    Pattern,
    PatternSet,
    classify_curvature,
    curvature_at,
    fd_hessian,
    forward,
    forward_many,
    gradient,
    gradient_magnitude,
    gradient_many,
    hessian,
    hessian_eigenvalues,
    loss,
    loss_and_gradient,
    loss_many,
)
from .plots import emit_scatter_plot
from .stagnation import (
    BasinEstimate,
    StagnationParams,
    WalkStagnation,
    aggregate,
    analyse_walk,
    detect_stagnant_regions,
    ewma,
    load_series,
    moving_stdev,
    normalise_series,
)
from .walks import (
    BatchResult,
    Granularity,
    StepRecord,
    WalkConfig,
    WalkFailure,
    WalkTrace,
    derive_seeds,
    init_point,
    run_walk,
    run_walk_batch,
    walk_rng,
    walk_step,
)

__version__ = "0.1.0"
