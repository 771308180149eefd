"""Streaming unsupervised lifelong learning with bipolar hypervectors."""

from .adaptive import AdaptiveLearner, DimensionMask, compute_mask, masked_cosine
from .encoder import Encoder, EncoderConfig, EncoderTables, gen_tables
from .evaluation import ContingencyTable, MetricRecord, acc, contingency, evaluate, purity
from .hdcore import AccumHV, bind, bundle, cosine, hamming, permute, random_hv, sign
from .learner import UNTRAINED, BatchReport, LearnerConfig, LifelongLearner, SampleEvent
from .memory import ClusterEntry, ClusterMemory, EmptyMemory
from .semi import SemiSupervisedLearner, SupervisedHDC, infer_supervised

__version__ = "0.1.0"

__all__ = [
    "AccumHV", "AdaptiveLearner", "BatchReport", "ClusterEntry", "ClusterMemory", "ContingencyTable",
    "DimensionMask", "EmptyMemory", "Encoder", "EncoderConfig", "EncoderTables", "LearnerConfig",
    "LifelongLearner", "MetricRecord", "SampleEvent", "SemiSupervisedLearner", "SupervisedHDC", "UNTRAINED",
    "acc", "bind", "bundle", "compute_mask", "contingency", "cosine", "evaluate", "gen_tables", "hamming",
    "infer_supervised", "masked_cosine", "permute", "purity", "random_hv", "sign",
]
