"""Synthetic scenes with analytically constructed position-sensitive feature maps.

The score maps are built so that pooling an RoI that coincides with a planted
box returns exactly 1 for the face class (and 0 for background), and the
regression maps point every nearby cell at the centre of its box. The pipeline
can therefore be checked end to end without a trained network.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import as_boxes, iou_matrix
from .psroi import BACKGROUND, FACE, PoolConfig, _sample_taps
from .tensor import FeatureMap


class PlacementInfeasible(RuntimeError):
    pass


@dataclass
class Scene:
    image_width: float
    image_height: float
    gts: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    seed: int = 0
    image_id: str = ""

    def __post_init__(self):
        self.gts = as_boxes(self.gts)
        if not self.image_id:
            self.image_id = f"scene_{self.seed:06d}"


def synth_scene(
    seed: int,
    image_size: tuple[float, float] = (1024, 1024),
    n_boxes: int = 10,
    side_range: tuple[float, float] = (16.0, 512.0),
    iou_ceiling: float = 0.3,
    max_rejections: int = 20_000,
) -> Scene:
    """Rejection-sample ``n_boxes`` square boxes with log-uniform sides.

    Every pair of boxes has IoU at most ``iou_ceiling``.
    """
    width, height = image_size
    lo, hi = side_range
    if not 0 < lo <= hi <= min(width, height):
        raise ValueError(f"side range {side_range} does not fit a {width}x{height} image")
    rng = np.random.default_rng(seed)
    boxes = np.zeros((0, 4))
    rejections = 0
    while len(boxes) < n_boxes:
        side = math.exp(rng.uniform(math.log(lo), math.log(hi)))
        x1 = rng.uniform(0.0, width - side)
        y1 = rng.uniform(0.0, height - side)
        cand = np.array([[x1, y1, x1 + side, y1 + side]])
        if len(boxes) and iou_matrix(cand, boxes).max() > iou_ceiling:
            rejections += 1
            if rejections > max_rejections:
                raise PlacementInfeasible(
                    f"placement infeasible: {len(boxes)} of {n_boxes} boxes placed after {rejections} rejections"
                )
            continue
        boxes = np.vstack([boxes, cand])
    return Scene(float(width), float(height), boxes, seed)


def feature_grid(image_size: tuple[float, float], stride: float) -> tuple[int, int]:
    """``(rows, cols)`` of a map covering the image, including the far edge."""
    width, height = image_size
    return math.ceil(height / stride) + 1, math.ceil(width / stride) + 1


def _cell_range(lo: float, hi: float, stride: float, n: int) -> slice:
    """Cells whose position ``i * stride`` lies in ``[lo, hi)``."""
    start = max(0, math.ceil(lo / stride))
    stop = min(n, math.ceil(hi / stride))
    return slice(start, max(start, stop))


def synth_features(
    scene: Scene,
    stride: float = 16.0,
    pool_cfg: PoolConfig = PoolConfig(),
    noise_sd: float = 0.0,
    noise_seed: int | None = None,
) -> tuple[FeatureMap, FeatureMap]:
    """Build ``(score_map, regress_map)`` for a scene.

    Score branch: the face channel of bin ``(i, j)`` is 1 on the cells inside
    bin ``(i, j)`` of any box, and on every cell the box-aligned RoI's samples
    in that bin touch through bilinear interpolation. Background is ``1 - face``.

    Regression branch: see :func:`_regression_field`.

    Gaussian noise with standard deviation ``noise_sd`` is added to every channel.
    """
    k = pool_cfg.k
    kk = k * k
    rows, cols = feature_grid((scene.image_width, scene.image_height), stride)
    face = np.zeros((rows, cols, kk), dtype=np.float32)
    for gt in scene.gts:
        x1, y1, x2, y2 = gt
        bw = (x2 - x1) / k
        bh = (y2 - y1) / k
        for i in range(k):
            rs = _cell_range(y1 + i * bh, y1 + (i + 1) * bh, stride, rows)
            for j in range(k):
                cs = _cell_range(x1 + j * bw, x1 + (j + 1) * bw, stride, cols)
                face[rs, cs, i * k + j] = 1.0
        grid = FeatureMap(face[:, :, :1], stride)  # only the shape and stride are read
        tr, tc, tbin, tw = _sample_taps(grid, gt, pool_cfg)
        hit = tw > 0
        face[tr[hit], tc[hit], tbin[hit]] = 1.0

    score = np.empty((rows, cols, pool_cfg.classes * kk), dtype=np.float32)
    score[:] = 0.0
    score[:, :, BACKGROUND * kk : (BACKGROUND + 1) * kk] = 1.0 - face
    score[:, :, FACE * kk : (FACE + 1) * kk] = face

    regress = _regression_field(scene, stride, k, rows, cols)

    if noise_sd > 0:
        rng = np.random.default_rng(scene.seed + 7919 if noise_seed is None else noise_seed)
        score += rng.normal(0.0, noise_sd, size=score.shape).astype(np.float32)
        regress += rng.normal(0.0, noise_sd, size=regress.shape).astype(np.float32)
    return FeatureMap(score, float(stride)), FeatureMap(regress, float(stride))


def _regression_field(scene: Scene, stride: float, k: int, rows: int, cols: int) -> np.ndarray:
    """Position-sensitive regression channels, shape ``(rows, cols, 4*k*k)``.

    For box ``g`` and bin ``(i, j)`` with relative bin offset ``r = (j + 0.5)/k - 0.5``
    (``q`` likewise for rows), a cell at image position ``u`` near that bin holds

    * ``dx = (gx + gw*r - ux) / gw``: the centre shift an RoI would need if its
      bin ``(i, j)`` sat at ``u``;
    * ``dw = 1 - (r / mean(r**2)) * (ux - gx) / gw``.

    Averaged over the bins of an RoI of width ``w`` centred at ``ax`` these give
    ``dx = (gx - ax)/gw`` and ``dw = 1 - w/gw``, a first-order step toward
    ``log(gw/w)``. ``dy``/``dh`` mirror this on rows. Each channel is written in
    a window around its bin; where windows of different boxes meet, the box
    whose bin centre is nearer owns the cell.
    """
    kk = k * k
    offsets = (np.arange(k) + 0.5) / k - 0.5
    gain = offsets / np.mean(offsets**2) if k > 1 else np.zeros(1)
    field = np.zeros((rows, cols, 4 * kk), dtype=np.float32)
    owner_dist = np.full((rows, cols, kk), np.inf)
    for x1, y1, x2, y2 in scene.gts:
        gw, gh = x2 - x1, y2 - y1
        gx, gy = 0.5 * (x1 + x2), 0.5 * (y1 + y2)
        half_w = 0.5 * gw / k + 0.35 * gw + stride
        half_h = 0.5 * gh / k + 0.35 * gh + stride
        for i in range(k):
            by = gy + gh * offsets[i]
            rs = _cell_range(by - half_h, by + half_h, stride, rows)
            uy = np.arange(rows)[rs][:, None] * stride
            for j in range(k):
                bx = gx + gw * offsets[j]
                cs = _cell_range(bx - half_w, bx + half_w, stride, cols)
                ux = np.arange(cols)[cs][None, :] * stride
                ch = i * k + j
                dist = np.maximum(np.abs(ux - bx), np.abs(uy - by))
                win = owner_dist[rs, cs, ch]
                own = dist < win
                if not own.any():
                    continue
                win[own] = dist[own]
                owner_dist[rs, cs, ch] = win
                values = (
                    (bx - ux) / gw + 0 * uy,
                    (by - uy) / gh + 0 * ux,
                    1.0 - gain[j] * (ux - gx) / gw + 0 * uy,
                    1.0 - gain[i] * (uy - gy) / gh + 0 * ux,
                )
                for comp, val in enumerate(values):
                    block = field[rs, cs, comp * kk + ch]
                    block[own] = val[own]
                    field[rs, cs, comp * kk + ch] = block
    return field


def scene_suite(
    base_seed: int,
    n_scenes: int,
    image_size: tuple[float, float] = (1024, 1024),
    n_boxes_range: tuple[int, int] = (10, 50),
    side_range: tuple[float, float] = (16.0, 512.0),
    iou_ceiling: float = 0.3,
) -> list[Scene]:
    """Scenes ``base_seed .. base_seed + n_scenes - 1``; box counts drawn inclusively from the range."""
    scenes = []
    for seed in range(base_seed, base_seed + n_scenes):
        n = int(np.random.default_rng(seed).integers(n_boxes_range[0], n_boxes_range[1] + 1))
        scenes.append(synth_scene(seed, image_size, n, side_range, iou_ceiling))
    return scenes
