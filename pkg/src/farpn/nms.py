"""Gaussian Soft-NMS and classic greedy NMS over scored proposals."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .geometry import iou_matrix
from .proposals import Proposals


@dataclass(frozen=True)
class NmsConfig:
    sigma: float = 0.35
    score_floor: float = 0.001
    hard_iou: float = 0.5
    mode: Literal["soft", "hard"] = "soft"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.score_floor < 0:
            raise ValueError("score_floor must be non-negative")
        if self.mode not in ("soft", "hard"):
            raise ValueError(f"unknown nms mode {self.mode!r}")


def soft_nms_indices(
    boxes: np.ndarray,
    scores: np.ndarray,
    sigma: float = 0.35,
    score_floor: float = 0.001,
    max_output: int | None = None,
):
    """Selection order and decayed scores.

    Repeatedly selects the highest remaining score (lowest index on ties) and
    multiplies every other remaining score by ``exp(-iou**2 / sigma)``; scores
    that fall below ``score_floor`` are dropped. Stopping after ``max_output``
    selections yields a prefix of the full result.
    """
    remaining = np.flatnonzero(scores >= score_floor)
    current = np.asarray(scores, dtype=np.float64)[remaining].copy()
    order: list[int] = []
    kept_scores: list[float] = []
    limit = len(remaining) if max_output is None else max_output
    while len(remaining) and len(order) < limit:
        best = int(np.argmax(current))
        idx = remaining[best]
        order.append(int(idx))
        kept_scores.append(float(current[best]))
        remaining = np.delete(remaining, best)
        current = np.delete(current, best)
        if not len(remaining):
            break
        overlap = iou_matrix(boxes[idx : idx + 1], boxes[remaining])[0]
        current *= np.exp(-(overlap * overlap) / sigma)
        alive = current >= score_floor
        remaining = remaining[alive]
        current = current[alive]
    return np.array(order, dtype=np.int64), np.array(kept_scores)


def soft_nms(proposals: Proposals, cfg: NmsConfig = NmsConfig(), max_output: int | None = None) -> Proposals:
    order, scores = soft_nms_indices(proposals.boxes, proposals.scores, cfg.sigma, cfg.score_floor, max_output)
    out = proposals.take(order)
    out.scores = scores
    return out


def hard_nms_indices(boxes: np.ndarray, scores: np.ndarray, iou_threshold: float = 0.5) -> np.ndarray:
    """Greedy NMS; a box is suppressed when its IoU with a kept box exceeds the threshold."""
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    suppressed = np.zeros(len(order), dtype=bool)
    keep = []
    for pos, idx in enumerate(order):
        if suppressed[pos]:
            continue
        keep.append(int(idx))
        rest = order[pos + 1 :]
        if len(rest):
            overlap = iou_matrix(boxes[idx : idx + 1], boxes[rest])[0]
            suppressed[pos + 1 :] |= overlap > iou_threshold
    return np.array(keep, dtype=np.int64)


def hard_nms(proposals: Proposals, cfg: NmsConfig = NmsConfig()) -> Proposals:
    return proposals.take(hard_nms_indices(proposals.boxes, proposals.scores, cfg.hard_iou))


def suppress(proposals: Proposals, cfg: NmsConfig = NmsConfig()) -> Proposals:
    return soft_nms(proposals, cfg) if cfg.mode == "soft" else hard_nms(proposals, cfg)
