"""Proposal generation: score every anchor, then iteratively regress and re-pool.

Refinement re-pools the regressed boxes from the same feature maps; no extra
layer is involved. Scores are the face-class softmax probability.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .anchors import AnchorConfig, AnchorSet, place, place_dense
from .geometry import clip_boxes, decode_boxes, valid_mask
from .proposals import Proposals
from .psroi import FACE, PoolConfig, batch_pool, softmax
from .tensor import FeatureMap


@dataclass(frozen=True)
class RefineConfig:
    iterations: int = 1
    top_k: int = 20_000
    output_n: int = 1_000

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not self.top_k >= self.output_n >= 1:
            raise ValueError("need top_k >= output_n >= 1")


def _pool_and_score(score_map, regress_map, boxes, pool_cfg, iteration) -> Proposals:
    pooled = batch_pool(score_map, regress_map, boxes, pool_cfg)
    probs = softmax(pooled.class_scores, axis=1)[:, FACE] if len(pooled) else np.zeros(0)
    return Proposals(boxes, probs, np.full(len(boxes), iteration, dtype=np.int64), pooled.deltas)


def score_all(
    score_map: FeatureMap, regress_map: FeatureMap, anchors, pool_cfg: PoolConfig = PoolConfig()
) -> Proposals:
    """Pool both branches for every anchor; proposals keep anchor order."""
    boxes = anchors.boxes if isinstance(anchors, AnchorSet) else np.asarray(anchors, dtype=np.float64).reshape(-1, 4)
    return _pool_and_score(score_map, regress_map, boxes, pool_cfg, 0)


def refine_step(
    score_map: FeatureMap,
    regress_map: FeatureMap,
    proposals: Proposals,
    image_size: tuple[float, float],
    cfg: RefineConfig = RefineConfig(),
    pool_cfg: PoolConfig = PoolConfig(),
) -> Proposals:
    """Regress the ``top_k`` best proposals, clip them and pool again.

    ``image_size`` is ``(width, height)`` in pixels. The result is in rank order
    of the input scores; boxes that collapse under a pixel after clipping are dropped.
    """
    if proposals.deltas is None:
        raise ValueError("proposals carry no regression deltas")
    top = proposals.ranked().take(np.arange(min(cfg.top_k, len(proposals))))
    if not len(top):
        return top
    boxes = clip_boxes(decode_boxes(top.boxes, top.deltas), *image_size)
    keep = valid_mask(boxes)
    next_iter = int(top.iteration.max()) + 1
    return _pool_and_score(score_map, regress_map, boxes[keep], pool_cfg, next_iter)


def propose(
    score_map: FeatureMap,
    regress_map: FeatureMap,
    anchor_cfg: AnchorConfig = AnchorConfig(),
    refine_cfg: RefineConfig = RefineConfig(),
    pool_cfg: PoolConfig = PoolConfig(),
    anchors: AnchorSet | None = None,
    uniform_stride: float | None = None,
) -> Proposals:
    """Anchors -> scoring -> ``iterations`` refinement rounds -> top ``output_n``.

    ``uniform_stride`` switches to dense placement at inference time; an
    explicit ``anchors`` set overrides placement altogether.
    """
    if anchors is None:
        anchors = place(anchor_cfg) if uniform_stride is None else place_dense(anchor_cfg, uniform_stride)
    image_size = (anchor_cfg.image_width, anchor_cfg.image_height)
    props = score_all(score_map, regress_map, anchors, pool_cfg)
    for _ in range(refine_cfg.iterations):
        props = refine_step(score_map, regress_map, props, image_size, refine_cfg, pool_cfg)
    ranked = props.ranked()
    return ranked.take(np.arange(min(refine_cfg.output_n, len(ranked))))
