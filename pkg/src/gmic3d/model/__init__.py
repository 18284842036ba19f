from .global_net import (
    GlobalNetwork,
    SegmentationLayer,
    relu_tanh,
    pooled_count,
    aggregate,
)
from .local_net import LocalNetwork, GatedAttention, LocalHead, fuse_predictions
from .network import Gmic3d

__all__ = [
    "GlobalNetwork",
    "SegmentationLayer",
    "relu_tanh",
    "pooled_count",
    "aggregate",
    "LocalNetwork",
    "GatedAttention",
    "LocalHead",
    "fuse_predictions",
    "Gmic3d",
]
