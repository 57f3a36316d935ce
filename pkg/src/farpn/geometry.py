"""Axis-aligned box arithmetic.

Boxes use continuous, half-open pixel coordinates ``[x1, x2) x [y1, y2)`` with
no "+1" convention, so ``width = x2 - x1``. Scalar helpers take :class:`Box`
values; the ``*_boxes`` / ``iou_matrix`` variants work on ``(N, 4)`` arrays and
are what the pipeline uses internally.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

#: Bound applied to the log-size components of a delta before exponentiation.
DEFAULT_LOG_CLAMP = 4.0


class Box(NamedTuple):
    x1: float
    y1: float
    x2: float
    y2: float

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    def area(self) -> float:
        return max(self.width, 0.0) * max(self.height, 0.0)

    def side_scale(self) -> float:
        """Square root of the area: the size ``s`` used for anchor strides."""
        return math.sqrt(self.area())


class Delta(NamedTuple):
    """Center shift normalized by anchor size, plus log size ratios."""

    dx: float
    dy: float
    dw: float
    dh: float


ZERO_DELTA = Delta(0.0, 0.0, 0.0, 0.0)


def as_boxes(boxes) -> np.ndarray:
    """Coerce a Box, a sequence of boxes or an array into a float64 ``(N, 4)`` array."""
    arr = np.asarray(boxes, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, 4) if arr.size == 4 else arr.reshape(0, 4)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValueError(f"expected boxes of shape (N, 4), got {arr.shape}")
    return arr


def box_areas(boxes: np.ndarray) -> np.ndarray:
    w = np.clip(boxes[:, 2] - boxes[:, 0], 0.0, None)
    h = np.clip(boxes[:, 3] - boxes[:, 1], 0.0, None)
    return w * h


def iou(a: Box, b: Box) -> float:
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = Box(*a).area() + Box(*b).area() - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def iou_matrix(a, b) -> np.ndarray:
    """Pairwise IoU, shape ``(len(a), len(b))``. Degenerate pairs give 0."""
    a = as_boxes(a)
    b = as_boxes(b)
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)))
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    union = box_areas(a)[:, None] + box_areas(b)[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=(union > 0.0) & (inter > 0.0))
    return out


def clip(b: Box, width: float, height: float) -> Box:
    return Box(
        min(max(b.x1, 0.0), width),
        min(max(b.y1, 0.0), height),
        min(max(b.x2, 0.0), width),
        min(max(b.y2, 0.0), height),
    )


def clip_boxes(boxes: np.ndarray, width: float, height: float) -> np.ndarray:
    out = np.empty_like(boxes, dtype=np.float64)
    np.clip(boxes[:, 0::2], 0.0, width, out=out[:, 0::2])
    np.clip(boxes[:, 1::2], 0.0, height, out=out[:, 1::2])
    return out


def valid_mask(boxes: np.ndarray, min_size: float = 1.0) -> np.ndarray:
    """True where both sides are at least ``min_size`` pixels."""
    return ((boxes[:, 2] - boxes[:, 0]) >= min_size) & ((boxes[:, 3] - boxes[:, 1]) >= min_size)


def _check_anchors(anchors: np.ndarray) -> None:
    if not valid_mask(anchors).all():
        raise ValueError("degenerate anchor")


def encode_boxes(anchors, targets) -> np.ndarray:
    """Regression deltas ``(dx, dy, dw, dh)`` taking each anchor onto its target."""
    anchors = as_boxes(anchors)
    targets = as_boxes(targets)
    _check_anchors(anchors)
    aw = anchors[:, 2] - anchors[:, 0]
    ah = anchors[:, 3] - anchors[:, 1]
    tw = targets[:, 2] - targets[:, 0]
    th = targets[:, 3] - targets[:, 1]
    dx = ((targets[:, 0] + 0.5 * tw) - (anchors[:, 0] + 0.5 * aw)) / aw
    dy = ((targets[:, 1] + 0.5 * th) - (anchors[:, 1] + 0.5 * ah)) / ah
    return np.stack([dx, dy, np.log(tw / aw), np.log(th / ah)], axis=1)


def decode_boxes(anchors, deltas, log_clamp: float = DEFAULT_LOG_CLAMP) -> np.ndarray:
    """Apply ``(N, 4)`` deltas to anchors; log-size terms are clamped to ``±log_clamp``.

    Edges are moved relative to the anchor's own edges, so a zero delta returns
    the anchor bit-for-bit.
    """
    anchors = as_boxes(anchors)
    deltas = np.asarray(deltas, dtype=np.float64).reshape(-1, 4)
    _check_anchors(anchors)
    aw = anchors[:, 2] - anchors[:, 0]
    ah = anchors[:, 3] - anchors[:, 1]
    shift_x = deltas[:, 0] * aw
    shift_y = deltas[:, 1] * ah
    # half the change in width/height: 0.5 * w * (exp(dw) - 1)
    grow_x = 0.5 * aw * np.expm1(np.clip(deltas[:, 2], -log_clamp, log_clamp))
    grow_y = 0.5 * ah * np.expm1(np.clip(deltas[:, 3], -log_clamp, log_clamp))
    return np.stack(
        [
            anchors[:, 0] + shift_x - grow_x,
            anchors[:, 1] + shift_y - grow_y,
            anchors[:, 2] + shift_x + grow_x,
            anchors[:, 3] + shift_y + grow_y,
        ],
        axis=1,
    )


def encode(anchor: Box, target: Box) -> Delta:
    return Delta(*encode_boxes([anchor], [target])[0].tolist())


def decode(anchor: Box, delta: Delta, log_clamp: float = DEFAULT_LOG_CLAMP) -> Box:
    return Box(*decode_boxes([anchor], [delta], log_clamp)[0].tolist())
