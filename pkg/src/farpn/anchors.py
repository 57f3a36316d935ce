"""Floating anchor placement.

Each (scale, ratio) pair is laid on its own square lattice whose pitch depends
on the scale alone, ``max(c, s / d)``, so large anchors are placed sparsely.
Lattice centers start at half a pitch from the image origin. Anchors are
clipped to the image and any anchor with a side under one pixel is dropped.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import as_boxes, clip_boxes, valid_mask

DEFAULT_SCALES = (16.0, 32.0, 64.0, 128.0, 256.0, 512.0)

#: Provenance marker for ground-truth-augmented anchors.
GT_INDEX = -1


@dataclass(frozen=True)
class AnchorConfig:
    scales: tuple[float, ...] = DEFAULT_SCALES
    ratios: tuple[float, ...] = (1.0,)
    c: float = 16.0
    d: float = 5.0
    image_width: float = 1024.0
    image_height: float = 1024.0

    def __post_init__(self):
        object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        if any(s <= 0 for s in self.scales):
            raise ValueError("anchor scales must be positive")
        if any(r <= 0 for r in self.ratios):
            raise ValueError("aspect ratios must be positive")
        if self.c <= 0 or self.d <= 0:
            raise ValueError("c and d must be positive")


@dataclass
class AnchorSet:
    """Anchor boxes plus provenance.

    ``scale_idx``/``ratio_idx``/``grid_row``/``grid_col`` are ``GT_INDEX`` for
    anchors that came from ground-truth augmentation.
    """

    boxes: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    scale_idx: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    ratio_idx: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    grid_row: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    grid_col: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return len(self.boxes)

    @property
    def from_ground_truth(self) -> np.ndarray:
        return self.scale_idx == GT_INDEX

    def subset(self, index) -> "AnchorSet":
        return AnchorSet(
            self.boxes[index],
            self.scale_idx[index],
            self.ratio_idx[index],
            self.grid_row[index],
            self.grid_col[index],
        )

    @classmethod
    def from_boxes(cls, boxes) -> "AnchorSet":
        """Wrap arbitrary boxes; provenance is marked as ground truth."""
        boxes = as_boxes(boxes)
        n = len(boxes)
        marker = np.full(n, GT_INDEX, dtype=np.int64)
        return cls(boxes, marker, marker.copy(), marker.copy(), marker.copy())

    @classmethod
    def concat(cls, sets: Sequence["AnchorSet"]) -> "AnchorSet":
        if not sets:
            return cls()
        return cls(
            np.concatenate([s.boxes for s in sets]).reshape(-1, 4),
            np.concatenate([s.scale_idx for s in sets]),
            np.concatenate([s.ratio_idx for s in sets]),
            np.concatenate([s.grid_row for s in sets]),
            np.concatenate([s.grid_col for s in sets]),
        )


def scale_stride(s: float, c: float = 16.0, d: float = 5.0) -> float:
    return max(c, s / d)


def lattice_centers(extent: float, pitch: float) -> np.ndarray:
    """Centers ``pitch/2 + n*pitch`` strictly inside ``[0, extent)``."""
    # The epsilon keeps e.g. 1280 / 102.4 - 0.5 == 12 from rounding up to 13.
    count = max(0, math.ceil(extent / pitch - 0.5 - 1e-9))
    return pitch * (np.arange(count) + 0.5)


def _enumerate(config: AnchorConfig, pitch_for: Callable[[float], float]) -> AnchorSet:
    if config.image_width < 1 or config.image_height < 1:
        raise ValueError("image must be at least 1x1 pixel")
    parts = []
    for si, s in enumerate(config.scales):
        pitch = pitch_for(s)
        xs = lattice_centers(config.image_width, pitch)
        ys = lattice_centers(config.image_height, pitch)
        rows, cols = np.meshgrid(np.arange(len(ys)), np.arange(len(xs)), indexing="ij")
        rows = rows.ravel()
        cols = cols.ravel()
        cx = xs[cols]
        cy = ys[rows]
        for ri, r in enumerate(config.ratios):
            half_w = 0.5 * s / math.sqrt(r)
            half_h = 0.5 * s * math.sqrt(r)
            boxes = np.stack([cx - half_w, cy - half_h, cx + half_w, cy + half_h], axis=1)
            boxes = clip_boxes(boxes, config.image_width, config.image_height)
            keep = valid_mask(boxes)
            n = int(keep.sum())
            parts.append(
                AnchorSet(
                    boxes[keep],
                    np.full(n, si, dtype=np.int64),
                    np.full(n, ri, dtype=np.int64),
                    rows[keep].astype(np.int64),
                    cols[keep].astype(np.int64),
                )
            )
    return AnchorSet.concat(parts)


def place(config: AnchorConfig) -> AnchorSet:
    """Strided placement: pitch ``max(c, s/d)`` per scale."""
    return _enumerate(config, lambda s: scale_stride(s, config.c, config.d))


def place_dense(config: AnchorConfig, uniform_stride: float) -> AnchorSet:
    """Placement with one pitch for every scale (naive RPN-style grid)."""
    if uniform_stride <= 0:
        raise ValueError("uniform_stride must be positive")
    return _enumerate(config, lambda s: float(uniform_stride))


def augment_with_ground_truth(anchors: AnchorSet, gts) -> AnchorSet:
    gts = as_boxes(gts)
    if len(gts) == 0:
        return anchors
    return AnchorSet.concat([anchors, AnchorSet.from_boxes(gts.copy())])


def anchors_to_csv(anchors: AnchorSet) -> str:
    buf = io.StringIO()
    for box, si, ri in zip(anchors.boxes.tolist(), anchors.scale_idx.tolist(), anchors.ratio_idx.tolist()):
        buf.write(f"{box[0]!r},{box[1]!r},{box[2]!r},{box[3]!r},{si},{ri}\n")
    return buf.getvalue()


def anchors_from_csv(text: str) -> AnchorSet:
    rows = [line.split(",") for line in text.splitlines() if line.strip()]
    for lineno, row in enumerate(rows, 1):
        if len(row) != 6:
            raise ValueError(f"line {lineno}: expected 6 columns, got {len(row)}")
    if not rows:
        return AnchorSet()
    boxes = np.array([[float(v) for v in row[:4]] for row in rows])
    si = np.array([int(row[4]) for row in rows], dtype=np.int64)
    ri = np.array([int(row[5]) for row in rows], dtype=np.int64)
    marker = np.full(len(rows), GT_INDEX, dtype=np.int64)
    return AnchorSet(boxes, si, ri, marker, marker.copy())
