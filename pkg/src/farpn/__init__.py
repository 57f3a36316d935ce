"""Floating-anchor region proposals: anchor placement, position-sensitive
pooled scoring, iterative refinement, Soft-NMS and recall evaluation."""

__version__ = "0.1.0"

from .anchors import AnchorConfig, AnchorSet, place, place_dense, scale_stride
from .evalrec import Dataset, parse_annotations, recall_at
from .geometry import Box, Delta, decode, encode, iou, iou_matrix
from .nms import NmsConfig, hard_nms, soft_nms
from .proposals import Proposal, Proposals
from .psroi import PoolConfig, batch_pool, psroi_pool, psroi_pool_grad
from .refine import RefineConfig, propose, refine_step
from .synth import Scene, synth_features, synth_scene
from .targets import AssignConfig, ScaleRange, assign, sample, snip_filter
from .tensor import FeatureMap, read_tensor, write_tensor

__all__ = [
    "AnchorConfig", "AnchorSet", "AssignConfig", "Box", "Dataset", "Delta", "FeatureMap",
    "NmsConfig", "PoolConfig", "Proposal", "Proposals", "RefineConfig", "ScaleRange", "Scene",
    "assign", "batch_pool", "decode", "encode", "hard_nms", "iou", "iou_matrix",
    "parse_annotations", "place", "place_dense", "propose", "psroi_pool", "psroi_pool_grad",
    "read_tensor", "recall_at", "refine_step", "sample", "scale_stride", "snip_filter",
    "soft_nms", "synth_features", "synth_scene", "write_tensor",
]
