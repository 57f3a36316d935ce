import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from farpn.anchors import AnchorSet
from farpn.targets import (
    IGNORED,
    NEGATIVE,
    POSITIVE,
    WIDER_SNIP_RANGES,
    AssignConfig,
    ScaleRange,
    assign,
    cap_indices,
    cap_rois,
    sample,
    snip_filter,
)

from conftest import random_boxes
from oracles import iou_reference


def box_with_iou(target_iou, side=10.0):
    """A box sharing height with [0,0,side,side] and shifted so the IoU equals ``target_iou``."""
    # overlap o*side, union (2-o)*side  ->  iou = o / (2 - o)
    o = 2 * target_iou / (1 + target_iou)
    shift = side * (1 - o)
    return [shift, 0.0, shift + side, side]


def test_assign_examples():
    gt = [[0, 0, 10, 10]]
    anchors = [box_with_iou(0.6), box_with_iou(0.45), box_with_iou(0.2)]
    labels = assign(anchors, gt)
    assert labels.labels.tolist() == [POSITIVE, IGNORED, NEGATIVE]
    assert labels.matched_gt.tolist() == [0, -1, -1]
    assert assign(anchors, np.zeros((0, 4))).labels.tolist() == [NEGATIVE] * 3


def test_threshold_boundaries_exact():
    gt = [[0, 0, 10, 10]]
    labels = assign([[0, 0, 5, 10], [0, 0, 4, 10]], gt).labels
    # IoU 0.5 is not > 0.5 and 0.4 is not < 0.4
    assert labels.tolist() == [IGNORED, IGNORED]


def test_assign_matches_threshold_oracle(rng):
    for _ in range(200):
        anchors = random_boxes(rng, 20, extent=40)
        gts = random_boxes(rng, int(rng.integers(1, 5)), extent=40)
        labels = assign(anchors, gts)
        for a, lab in zip(anchors.tolist(), labels.labels.tolist()):
            best = max(iou_reference(a, g) for g in gts.tolist())
            want = POSITIVE if best > 0.5 else NEGATIVE if best < 0.4 else IGNORED
            assert lab == want


def test_gt_anchors_always_positive(rng):
    gts = random_boxes(rng, 10)
    anchors = np.vstack([random_boxes(rng, 30), gts])
    labels = assign(anchors, gts).labels
    assert (labels[-10:] == POSITIVE).all()


def _labels_with(pos, neg_ious):
    from farpn.targets import LabelSet

    n = pos + len(neg_ious)
    labels = np.array([POSITIVE] * pos + [NEGATIVE] * len(neg_ious), dtype=np.int8)
    max_iou = np.concatenate([np.full(pos, 0.8), neg_ious])
    return LabelSet(labels, np.where(labels == POSITIVE, 0, -1), max_iou)


def test_sample_examples():
    assert len(sample(_labels_with(0, np.zeros(10))).pos) == 0
    s = sample(_labels_with(500, np.zeros(10)))
    assert len(s.pos) == 128
    assert (s.pos < 500).all()
    labels = _labels_with(0, np.array([0.0] * 100 + [0.2] * 50))
    s = sample(labels)
    assert len(s.hard_neg) <= 32
    assert (labels.max_iou[s.hard_neg] == 0.2).all()
    assert set(s.hard_neg) <= set(s.neg)
    assert len(s.neg) <= 128


@given(st.integers(0, 600), st.integers(0, 600), st.integers(0, 10_000), st.booleans())
def test_sample_budgets(n_pos, n_neg, seed, in_budget):
    rng = np.random.default_rng(seed)
    labels = _labels_with(n_pos, rng.uniform(0, 0.4, n_neg))
    cfg = AssignConfig(rng_seed=seed, hard_neg_in_budget=in_budget)
    s = sample(labels, cfg)
    assert len(s.pos) <= 128 and len(s.pos) == min(128, n_pos)
    assert len(s.neg) <= (128 if in_budget else 160)
    assert len(np.unique(s.neg)) == len(s.neg) and len(np.unique(s.pos)) == len(s.pos)
    assert (labels.labels[s.pos] == POSITIVE).all() and (labels.labels[s.neg] == NEGATIVE).all()
    again = sample(labels, cfg)
    assert s.pos.tolist() == again.pos.tolist() and s.neg.tolist() == again.neg.tolist()


def test_cap_examples(rng):
    gts = [[0, 0, 50, 50]]
    small = random_boxes(rng, 10_000, extent=1000)
    assert len(cap_indices(small, gts)) == 10_000
    near = np.tile([0.0, 0.0, 50.0, 50.0], (1000, 1)) + rng.uniform(-3, 3, size=(1000, 4))
    far = random_boxes(rng, 59_000, extent=1000) + 2000
    anchors = AnchorSet.from_boxes(np.vstack([far[:30_000], near, far[30_000:]]))
    out = cap_rois(anchors, gts)
    assert len(out) == 50_000
    idx = cap_indices(anchors, gts)
    assert set(range(30_000, 31_000)) <= set(idx.tolist())
    assert len(cap_indices(anchors, gts, AssignConfig(roi_cap=0))) == 0


def test_cap_keeps_best_overlaps_when_oversubscribed():
    anchors = np.array([[0, 0, 10, 10], [0, 0, 9, 10], [0, 0, 5, 10], [100, 100, 110, 110]], float)
    idx = cap_indices(anchors, [[0, 0, 10, 10]], AssignConfig(roi_cap=2))
    assert idx.tolist() == [0, 1]


def snip_oracle(boxes, lo, hi):
    return [lo <= math.sqrt((b[2] - b[0]) * (b[3] - b[1])) < hi for b in boxes]


def test_snip_examples():
    r = WIDER_SNIP_RANGES[(1800, 2800)]
    assert snip_filter([[0, 0, 100, 100], [0, 0, 200, 200]], r).tolist() == [True, False]
    assert snip_filter([[0, 0, 80, 80]], ScaleRange(80, math.inf)).tolist() == [True]
    with pytest.raises(ValueError):
        ScaleRange(10, 10)


def test_snip_matches_oracle(rng):
    boxes = random_boxes(rng, 500, extent=500, max_side=400)
    for r in WIDER_SNIP_RANGES.values():
        assert snip_filter(boxes, r).tolist() == snip_oracle(boxes.tolist(), r.min_side, r.max_side)


def test_assign_config_validation():
    with pytest.raises(ValueError):
        AssignConfig(pos_iou=0.3, neg_iou=0.4)
