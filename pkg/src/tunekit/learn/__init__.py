from .base import Capabilities, Learner, Model, get_learner, learner_ids
from .learners import (
    CARTLearner,
    ElasticNetLearner,
    FeaturelessLearner,
    KNNLearner,
    RandomLabelLearner,
)
from .pipeline import Branch, Pipeline, pipeline_from_id
from .preprocess import (
    CorrFilterOp,
    ImputeOp,
    OneHotOp,
    StandardizeOp,
    SubsampleOp,
)
from .threshold import ThresholdRule, tune_threshold_binary, tune_threshold_weights

__all__ = [
    "Branch",
    "Capabilities",
    "CARTLearner",
    "CorrFilterOp",
    "ElasticNetLearner",
    "FeaturelessLearner",
    "ImputeOp",
    "KNNLearner",
    "Learner",
    "Model",
    "OneHotOp",
    "Pipeline",
    "RandomLabelLearner",
    "StandardizeOp",
    "SubsampleOp",
    "ThresholdRule",
    "get_learner",
    "learner_ids",
    "pipeline_from_id",
    "tune_threshold_binary",
    "tune_threshold_weights",
]
