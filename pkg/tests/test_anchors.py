import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from farpn.anchors import (
    GT_INDEX,
    AnchorConfig,
    AnchorSet,
    anchors_from_csv,
    anchors_to_csv,
    augment_with_ground_truth,
    place,
    place_dense,
    scale_stride,
)
from farpn.geometry import iou_matrix
from farpn.targets import POSITIVE, assign


def count_oracle(scales, ratios, pitch_for, width, height):
    """Walk the lattice one centre at a time and count anchors that survive clipping."""
    total = 0
    for s in scales:
        p = pitch_for(s)
        for r in ratios:
            w, h = s / math.sqrt(r), s * math.sqrt(r)
            y = p / 2
            while y < height:
                x = p / 2
                while x < width:
                    cw = min(x + w / 2, width) - max(x - w / 2, 0)
                    ch = min(y + h / 2, height) - max(y - h / 2, 0)
                    total += cw >= 1 and ch >= 1
                    x += p
                y += p
    return total


def test_scale_stride_examples():
    assert scale_stride(16, 16, 5) == 16
    assert scale_stride(256, 16, 5) == pytest.approx(51.2)
    assert scale_stride(80, 16, 5) == 16


def test_single_scale_count():
    cfg = AnchorConfig(scales=(16,), image_width=1280, image_height=1280)
    assert len(place(cfg)) == 6400


def test_empty_scales():
    assert len(place(AnchorConfig(scales=()))) == 0


@pytest.mark.parametrize(
    "scales,ratios,size",
    [((16, 32, 64, 128, 256, 512), (1.0,), (1024, 1024)), ((32, 64, 128, 256, 512), (0.5, 1.0, 2.0), (1280, 1280)), ((24, 300), (1.0, 3.0), (333, 517))],
)
def test_counts_match_enumeration_oracle(scales, ratios, size):
    cfg = AnchorConfig(scales=scales, ratios=ratios, image_width=size[0], image_height=size[1])
    assert len(place(cfg)) == count_oracle(scales, ratios, lambda s: max(16, s / 5), *size)
    assert len(place_dense(cfg, 16)) == count_oracle(scales, ratios, lambda s: 16, *size)


def test_dense_matches_place_for_its_own_stride():
    cfg = AnchorConfig(scales=(256,), image_width=700, image_height=500)
    a = place(cfg)
    b = place_dense(cfg, scale_stride(256))
    np.testing.assert_array_equal(a.boxes, b.boxes)
    np.testing.assert_array_equal(a.grid_row, b.grid_row)


def test_dense_stride_counts():
    cfg = AnchorConfig(scales=(16,), image_width=1280, image_height=1280)
    assert len(place_dense(cfg, 32)) == 1600
    assert len(place_dense(cfg, 16)) == 6400


@pytest.mark.parametrize("stride", [12.0, 20.0, 33.0, 50.0])
def test_halving_stride_quadruples_count(stride):
    cfg = AnchorConfig(scales=(64,), image_width=1000, image_height=900)
    ratio = len(place_dense(cfg, stride / 2)) / len(place_dense(cfg, stride))
    assert abs(ratio - 4.0) <= 0.05 * 4.0 + 4.0 * 2 * stride / 900


@given(st.floats(8, 64), st.floats(1, 20), st.lists(st.sampled_from([16, 32, 64, 128, 256, 512]), min_size=1, max_size=4, unique=True))
def test_count_non_increasing_in_c(c, extra, scales):
    small = AnchorConfig(scales=tuple(scales), c=c, image_width=600, image_height=400)
    large = AnchorConfig(scales=tuple(scales), c=c + extra, image_width=600, image_height=400)
    assert len(place(large)) <= len(place(small))


@given(st.sampled_from([16, 32, 64]), st.sampled_from([128, 256, 512]))
def test_strided_fewer_than_dense_when_a_scale_exceeds(small, big):
    cfg = AnchorConfig(scales=(small, big), image_width=800, image_height=640)
    assert big / cfg.d > cfg.c
    assert len(place(cfg)) < len(place_dense(cfg, cfg.c))


@given(
    st.lists(st.floats(4, 600), min_size=1, max_size=4),
    st.lists(st.floats(0.25, 4), min_size=1, max_size=3),
    st.floats(20, 900),
    st.floats(20, 900),
)
def test_anchors_inside_and_valid(scales, ratios, w, h):
    a = place(AnchorConfig(scales=tuple(scales), ratios=tuple(ratios), image_width=w, image_height=h))
    b = a.boxes
    assert (b[:, 0] >= 0).all() and (b[:, 1] >= 0).all()
    assert (b[:, 2] <= w).all() and (b[:, 3] <= h).all()
    assert (b[:, 2] - b[:, 0] >= 1).all() and (b[:, 3] - b[:, 1] >= 1).all()


def test_order_is_scale_ratio_rowmajor():
    a = place(AnchorConfig(scales=(32, 128), ratios=(0.5, 2.0), image_width=200, image_height=150))
    key = np.lexsort((a.grid_col, a.grid_row, a.ratio_idx, a.scale_idx))
    np.testing.assert_array_equal(key, np.arange(len(a)))


def test_place_deterministic():
    cfg = AnchorConfig(ratios=(0.5, 1, 2))
    a, b = place(cfg), place(cfg)
    assert a.boxes.tobytes() == b.boxes.tobytes()


def test_coverage_floor_pinned():
    # Floor measured once on this sample with the default config, then pinned.
    cfg = AnchorConfig()
    anchors = place(cfg).boxes
    rng = np.random.default_rng(0)
    lo, hi = 16 / math.sqrt(2), min(512 * math.sqrt(2), 1024)
    side = np.exp(rng.uniform(math.log(lo), math.log(hi), 3000))
    side = side[side < 1024]
    x = rng.uniform(0, 1024 - side)
    y = rng.uniform(0, 1024 - side)
    gts = np.stack([x, y, x + side, y + side], axis=1)
    best = np.concatenate([iou_matrix(gts[i : i + 300], anchors).max(axis=1) for i in range(0, len(gts), 300)])
    assert best.min() >= 0.12


def test_augment_with_ground_truth():
    base = place(AnchorConfig(scales=(64,), image_width=128, image_height=128))
    assert augment_with_ground_truth(base, np.zeros((0, 4))) is base
    gt = [10.3, 7.7, 42.9, 55.1]
    out = augment_with_ground_truth(base, [gt])
    assert len(out) == len(base) + 1
    assert out.boxes[-1].tolist() == gt
    assert out.from_ground_truth.tolist() == [False] * len(base) + [True]
    assert out.scale_idx[-1] == GT_INDEX
    labels = assign(out, [gt])
    assert labels.labels[-1] == POSITIVE


def test_csv_round_trip():
    a = place(AnchorConfig(scales=(16, 100), ratios=(0.7, 1.3), image_width=97, image_height=61))
    b = anchors_from_csv(anchors_to_csv(a))
    assert b.boxes.tobytes() == a.boxes.tobytes()
    np.testing.assert_array_equal(b.scale_idx, a.scale_idx)
    np.testing.assert_array_equal(b.ratio_idx, a.ratio_idx)
    assert len(anchors_from_csv("")) == 0
    with pytest.raises(ValueError):
        anchors_from_csv("1,2,3\n")


def test_config_validation():
    with pytest.raises(ValueError):
        AnchorConfig(scales=(0,))
    with pytest.raises(ValueError):
        AnchorConfig(ratios=(-1,))
    with pytest.raises(ValueError):
        AnchorConfig(c=0)
    with pytest.raises(ValueError):
        place_dense(AnchorConfig(), 0)


def test_anchor_set_helpers():
    a = AnchorSet.from_boxes([[0, 0, 4, 4], [1, 1, 3, 3]])
    assert len(a.subset([1])) == 1
    assert len(AnchorSet.concat([a, a])) == 4
