"""Submodular set-function losses over labeled embedding batches."""

from .batch import ClassPartition, EmbeddingBatch, partition_from_labels
from .kernels import (
    DistanceMatrix,
    SimilarityMatrix,
    cosine_similarity,
    euclidean_distance,
    kernel_gradient,
    rbf_similarity,
    similarity,
)
from .losses import (
    LossConfig,
    LossResult,
    loss_baseline,
    loss_fl,
    loss_gc,
    loss_logdet,
    loss_submod_variant,
    total_loss,
)
from .objectives import EXPECTED_PROPERTY, OBJECTIVES

__version__ = "0.1.0"

__all__ = [
    "ClassPartition",
    "DistanceMatrix",
    "EmbeddingBatch",
    "EXPECTED_PROPERTY",
    "LossConfig",
    "LossResult",
    "OBJECTIVES",
    "SimilarityMatrix",
    "cosine_similarity",
    "euclidean_distance",
    "kernel_gradient",
    "loss_baseline",
    "loss_fl",
    "loss_gc",
    "loss_logdet",
    "loss_submod_variant",
    "partition_from_labels",
    "rbf_similarity",
    "similarity",
    "total_loss",
]
