"""Position-sensitive RoI pooling.

An RoI is mapped to feature coordinates (divide by the map stride) and split
into ``k x k`` bins. Bin ``(i, j)`` of output ``o`` reads only channel
``o*k*k + i*k + j``; within a bin, ``samples_per_bin**2`` bilinear samples on a
uniform interior grid are averaged, and the output is the mean over bins.

The score branch has ``classes`` outputs (0 is background, 1 is face); the
regression branch has 4 class-agnostic outputs ``(dx, dy, dw, dh)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from numba import njit

from .anchors import AnchorSet
from .geometry import Delta, as_boxes
from .tensor import FeatureMap

Branch = Literal["score", "regress"]

BACKGROUND = 0
FACE = 1


@dataclass(frozen=True)
class PoolConfig:
    k: int = 7
    classes: int = 2
    samples_per_bin: int = 2

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.classes < 2:
            raise ValueError("classes must be >= 2")
        if self.samples_per_bin < 1:
            raise ValueError("samples_per_bin must be >= 1")

    def outputs(self, branch: Branch) -> int:
        if branch == "score":
            return self.classes
        if branch == "regress":
            return 4
        raise ValueError(f"unknown branch {branch!r}")

    def channels(self, branch: Branch) -> int:
        return self.outputs(branch) * self.k * self.k


@dataclass(frozen=True)
class PooledResult:
    class_scores: np.ndarray
    deltas: Delta


@dataclass
class PooledBatch:
    """Pooled outputs for many RoIs, stored column-wise."""

    class_scores: np.ndarray
    deltas: np.ndarray

    def __len__(self) -> int:
        return len(self.class_scores)

    def __getitem__(self, i: int) -> PooledResult:
        return PooledResult(self.class_scores[i], Delta(*self.deltas[i].tolist()))

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def softmax(logits, axis: int = -1) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def _check_branch(fmap: FeatureMap, cfg: PoolConfig, branch: Branch) -> int:
    n_out = cfg.outputs(branch)
    if fmap.channels != n_out * cfg.k * cfg.k:
        raise ValueError(
            f"branch/channel mismatch: {branch} branch needs {n_out * cfg.k * cfg.k} channels, "
            f"map has {fmap.channels}"
        )
    return n_out


def _check_rois(boxes: np.ndarray) -> None:
    if len(boxes) and not ((boxes[:, 2] > boxes[:, 0]) & (boxes[:, 3] > boxes[:, 1])).all():
        raise ValueError("degenerate roi")
    if not np.isfinite(boxes).all():
        raise ValueError("non-finite roi")


def _sample_taps(fmap: FeatureMap, roi, cfg: PoolConfig):
    """Bilinear taps of every sample point of one RoI.

    Returns ``(rows, cols, bins, weights)``, each of shape ``(k*k*spb*spb*4,)``:
    the tap cell, the flattened bin index ``i*k + j`` and the tap weight already
    divided by the number of samples per output. Taps outside the grid have
    weight zero and clamped coordinates.
    """
    k, spb = cfg.k, cfg.samples_per_bin
    x1, y1, x2, y2 = (float(v) / fmap.stride for v in roi)
    frac = (np.arange(k)[:, None] + (np.arange(spb)[None, :] + 0.5) / spb).ravel()
    ys = y1 + (y2 - y1) / k * frac  # (k*spb,) ordered by (bin row, sample)
    xs = x1 + (x2 - x1) / k * frac
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    bin_i = np.repeat(np.arange(k), spb)
    bins = (bin_i[:, None] * k + bin_i[None, :]).ravel()
    yy = yy.ravel()
    xx = xx.ravel()
    y0 = np.floor(yy)
    x0 = np.floor(xx)
    fy = yy - y0
    fx = xx - x0
    rows, cols, weights = [], [], []
    for dy, wy in ((0, 1.0 - fy), (1, fy)):
        for dx, wx in ((0, 1.0 - fx), (1, fx)):
            r = y0.astype(np.int64) + dy
            c = x0.astype(np.int64) + dx
            inside = (r >= 0) & (r < fmap.height) & (c >= 0) & (c < fmap.width)
            rows.append(np.where(inside, r, 0))
            cols.append(np.where(inside, c, 0))
            weights.append(np.where(inside, wy * wx, 0.0))
    norm = 1.0 / (k * k * spb * spb)
    return (
        np.concatenate(rows),
        np.concatenate(cols),
        np.tile(bins, 4),
        np.concatenate(weights) * norm,
    )


def psroi_pool(fmap: FeatureMap, roi, cfg: PoolConfig = PoolConfig(), branch: Branch = "score") -> np.ndarray:
    """Pool one RoI; returns one value per output of ``branch``.

    Straightforward gather implementation, independent of the batched kernel.
    """
    n_out = _check_branch(fmap, cfg, branch)
    box = as_boxes(roi)
    _check_rois(box)
    rows, cols, bins, weights = _sample_taps(fmap, box[0], cfg)
    kk = cfg.k * cfg.k
    out = np.empty(n_out)
    for o in range(n_out):
        out[o] = np.dot(weights, fmap.data[rows, cols, o * kk + bins])
    return out


def psroi_pool_grad(
    fmap: FeatureMap, roi, cfg: PoolConfig = PoolConfig(), branch: Branch = "score", upstream=None
) -> FeatureMap:
    """Gradient of ``sum_o upstream[o] * psroi_pool(...)[o]`` with respect to the map."""
    n_out = _check_branch(fmap, cfg, branch)
    box = as_boxes(roi)
    _check_rois(box)
    upstream = np.asarray(upstream, dtype=np.float64).reshape(n_out)
    rows, cols, bins, weights = _sample_taps(fmap, box[0], cfg)
    kk = cfg.k * cfg.k
    grad = np.zeros(fmap.data.shape, dtype=np.float64)
    for o in range(n_out):
        np.add.at(grad, (rows, cols, o * kk + bins), upstream[o] * weights)
    return FeatureMap(grad, fmap.stride)


@njit(cache=True, nogil=True)
def _pool_kernel(data, stride, boxes, k, spb, n_out, out):  # pragma: no cover - compiled
    height, width, _ = data.shape
    kk = k * k
    norm = 1.0 / (kk * spb * spb)
    acc = np.empty(n_out)
    for n in range(boxes.shape[0]):
        x1 = boxes[n, 0] / stride
        y1 = boxes[n, 1] / stride
        bin_w = (boxes[n, 2] / stride - x1) / k
        bin_h = (boxes[n, 3] / stride - y1) / k
        for o in range(n_out):
            out[n, o] = 0.0
        for i in range(k):
            for j in range(k):
                ch = i * k + j
                for o in range(n_out):
                    acc[o] = 0.0
                for sy in range(spb):
                    y = y1 + bin_h * (i + (sy + 0.5) / spb)
                    y0 = int(np.floor(y))
                    fy = y - y0
                    for sx in range(spb):
                        x = x1 + bin_w * (j + (sx + 0.5) / spb)
                        x0 = int(np.floor(x))
                        fx = x - x0
                        for dy in range(2):
                            r = y0 + dy
                            if r < 0 or r >= height:
                                continue
                            wy = fy if dy else 1.0 - fy
                            for dx in range(2):
                                c = x0 + dx
                                if c < 0 or c >= width:
                                    continue
                                w = wy * (fx if dx else 1.0 - fx)
                                for o in range(n_out):
                                    acc[o] += w * data[r, c, o * kk + ch]
                for o in range(n_out):
                    out[n, o] += acc[o]
        for o in range(n_out):
            out[n, o] *= norm


def pool_rois(fmap: FeatureMap, rois, cfg: PoolConfig = PoolConfig(), branch: Branch = "score") -> np.ndarray:
    """Pool many RoIs with the compiled kernel; returns ``(N, outputs)``."""
    n_out = _check_branch(fmap, cfg, branch)
    boxes = np.ascontiguousarray(rois.boxes if isinstance(rois, AnchorSet) else as_boxes(rois), dtype=np.float64)
    _check_rois(boxes)
    out = np.zeros((len(boxes), n_out))
    if len(boxes):
        _pool_kernel(np.ascontiguousarray(fmap.data), float(fmap.stride), boxes, cfg.k, cfg.samples_per_bin, n_out, out)
    return out


def batch_pool(score_map: FeatureMap, regress_map: FeatureMap, rois, cfg: PoolConfig = PoolConfig()) -> PooledBatch:
    """Pool both branches for every RoI, in input order."""
    if score_map.stride != regress_map.stride:
        raise ValueError("score and regression maps have different strides")
    return PooledBatch(
        class_scores=pool_rois(score_map, rois, cfg, "score"),
        deltas=pool_rois(regress_map, rois, cfg, "regress"),
    )
