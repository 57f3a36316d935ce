"""Training targets: label assignment, batch sampling, RoI capping and SNIP ranges."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .anchors import AnchorSet
from .geometry import as_boxes, box_areas, iou_matrix

POSITIVE = 1
NEGATIVE = 0
IGNORED = -1


@dataclass(frozen=True)
class AssignConfig:
    pos_iou: float = 0.5
    neg_iou: float = 0.4
    max_pos: int = 128
    max_neg: int = 128
    hard_neg: int = 32
    hard_neg_min_iou: float = 0.1
    # When False the hard negatives are drawn on top of the max_neg budget.
    hard_neg_in_budget: bool = True
    roi_cap: int = 50_000
    cap_min_iou: float = 0.1
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.neg_iou <= self.pos_iou <= 1.0:
            raise ValueError("need 0 <= neg_iou <= pos_iou <= 1")
        if min(self.max_pos, self.max_neg, self.hard_neg, self.roi_cap) < 0:
            raise ValueError("sample budgets must be non-negative")


@dataclass(frozen=True)
class ScaleRange:
    """Half-open interval ``[min_side, max_side)`` of valid ``sqrt(area)``."""

    min_side: float = 0.0
    max_side: float = math.inf

    def __post_init__(self):
        if not 0.0 <= self.min_side < self.max_side:
            raise ValueError("need 0 <= min_side < max_side")


#: Valid object sizes per training resolution (shorter, longer side) on WIDER.
WIDER_SNIP_RANGES = {
    (1800, 2800): ScaleRange(0.0, 200.0),
    (1024, 1440): ScaleRange(32.0, 300.0),
    (512, 800): ScaleRange(80.0, math.inf),
}


@dataclass
class LabelSet:
    labels: np.ndarray
    matched_gt: np.ndarray
    max_iou: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def positives(self) -> np.ndarray:
        return np.flatnonzero(self.labels == POSITIVE)

    @property
    def negatives(self) -> np.ndarray:
        return np.flatnonzero(self.labels == NEGATIVE)


@dataclass
class Sample:
    pos: np.ndarray
    neg: np.ndarray
    hard_neg: np.ndarray


def _boxes(anchors) -> np.ndarray:
    return anchors.boxes if isinstance(anchors, AnchorSet) else as_boxes(anchors)


def max_overlaps(anchors, gts) -> tuple[np.ndarray, np.ndarray]:
    """Per-anchor best IoU over ``gts`` and the (lowest) gt index achieving it."""
    boxes = _boxes(anchors)
    gts = as_boxes(gts)
    if len(gts) == 0:
        return np.zeros(len(boxes)), np.full(len(boxes), -1, dtype=np.int64)
    overlaps = iou_matrix(boxes, gts)
    best = overlaps.argmax(axis=1)
    return overlaps[np.arange(len(boxes)), best], best.astype(np.int64)


def assign(anchors, gts, cfg: AssignConfig = AssignConfig()) -> LabelSet:
    best_iou, best_gt = max_overlaps(anchors, gts)
    labels = np.full(len(best_iou), IGNORED, dtype=np.int8)
    labels[best_iou > cfg.pos_iou] = POSITIVE
    labels[best_iou < cfg.neg_iou] = NEGATIVE
    matched = np.where(labels == POSITIVE, best_gt, -1)
    return LabelSet(labels, matched, best_iou)


def _take(rng: np.random.Generator, pool: np.ndarray, n: int) -> np.ndarray:
    if len(pool) <= n:
        return pool
    return np.sort(rng.choice(pool, size=n, replace=False))


def sample(labels: LabelSet, cfg: AssignConfig = AssignConfig()) -> Sample:
    """Seeded batch sampling: positives, negatives and hard negatives.

    ``hard_neg`` is always a subset of ``neg``.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    pos = _take(rng, labels.positives, cfg.max_pos)
    negatives = labels.negatives
    iou = labels.max_iou[negatives]
    hard_pool = negatives[(iou >= cfg.hard_neg_min_iou) & (iou < cfg.neg_iou)]
    n_hard = min(cfg.hard_neg, cfg.max_neg) if cfg.hard_neg_in_budget else cfg.hard_neg
    hard = _take(rng, hard_pool, n_hard)
    easy_budget = cfg.max_neg - len(hard) if cfg.hard_neg_in_budget else cfg.max_neg
    rest = np.setdiff1d(negatives, hard, assume_unique=True)
    easy = _take(rng, rest, easy_budget)
    return Sample(pos=pos, neg=np.union1d(easy, hard), hard_neg=hard)


def cap_indices(anchors, gts, cfg: AssignConfig = AssignConfig()) -> np.ndarray:
    """Indices (ascending) of at most ``roi_cap`` anchors, overlapping ones first."""
    boxes = _boxes(anchors)
    n = len(boxes)
    if n <= cfg.roi_cap:
        return np.arange(n)
    best_iou, _ = max_overlaps(boxes, gts)
    priority = np.flatnonzero(best_iou >= cfg.cap_min_iou)
    if len(priority) >= cfg.roi_cap:
        order = np.argsort(-best_iou[priority], kind="stable")
        return np.sort(priority[order[: cfg.roi_cap]])
    rng = np.random.default_rng(cfg.rng_seed)
    rest = np.flatnonzero(best_iou < cfg.cap_min_iou)
    fill = _take(rng, rest, cfg.roi_cap - len(priority))
    return np.union1d(priority, fill)


def cap_rois(anchors: AnchorSet, gts, cfg: AssignConfig = AssignConfig()) -> AnchorSet:
    if not isinstance(anchors, AnchorSet):
        anchors = AnchorSet.from_boxes(anchors)
    return anchors.subset(cap_indices(anchors, gts, cfg))


def snip_filter(boxes, scale_range: ScaleRange) -> np.ndarray:
    """True for boxes whose ``sqrt(area)`` lies in the range; others are ignored for the loss."""
    side = np.sqrt(box_areas(_boxes(boxes)))
    return (side >= scale_range.min_side) & (side < scale_range.max_side)
