"""tunekit: desk-scale hyperparameter optimization.

Mixed hierarchical search spaces, resampled objectives over built-in toy
learners and pipelines, six tuners (grid, random, evolution strategy,
GP-based Bayesian optimization, Hyperband, iterated racing), nested
resampling and threshold tuning, all behind a deterministic seeding scheme.
"""

from .data import (
    Dataset,
    GEEstimate,
    PredictionMatrix,
    ResamplingPlan,
    estimate_ge,
    make_dataset,
    make_holdout,
    make_kfold,
    read_csv,
    write_csv,
)
from .metrics import Metric, get_metric, metric_ids, score
from .nested import (
    HoldoutSpec,
    KFoldSpec,
    NestedReport,
    TunedLearner,
    nested_evaluate,
)
from .objective import (
    Archive,
    ArchiveEntry,
    FidelitySpec,
    Objective,
    ResampledObjective,
    SyntheticObjective,
    incumbent,
    make_synthetic,
    synthetic_objective,
    trace,
)
from .space import (
    Condition,
    Config,
    ParamSpec,
    SearchSpace,
    encode_numeric,
    grid,
    sample_uniform,
    space_from_yaml,
    space_to_yaml,
    validate,
)

__version__ = "0.1.0"
