import numpy as np
import pytest

from farpn.anchors import AnchorConfig, AnchorSet, place
from farpn.evalrec import greedy_match
from farpn.geometry import iou_matrix
from farpn.nms import soft_nms
from farpn.proposals import Proposals
from farpn.psroi import PoolConfig
from farpn.refine import RefineConfig, propose, refine_step, score_all
from farpn.synth import synth_features, synth_scene
from farpn.tensor import FeatureMap

IMAGE = (1024.0, 1024.0)


@pytest.fixture(scope="module")
def scene_maps():
    sc = synth_scene(0, n_boxes=30)
    return (sc, *synth_features(sc))


def mean_top_iou(props, gts, n=100):
    return iou_matrix(props.ranked().boxes[:n], gts).max(axis=1).mean()


def test_empty_anchors(scene_maps):
    _, s, r = scene_maps
    assert len(score_all(s, r, AnchorSet())) == 0


def test_constant_score_map():
    cfg = PoolConfig(k=3)
    s = FeatureMap(np.full((10, 10, 18), 2.0), 16.0)
    r = FeatureMap(np.zeros((10, 10, 36)), 16.0)
    props = score_all(s, r, place(AnchorConfig(scales=(32,), image_width=150, image_height=150)), cfg)
    np.testing.assert_allclose(props.scores, 0.5)


def test_aligned_beats_misaligned(scene_maps):
    sc, s, r = scene_maps
    gt = sc.gts[0]
    w = gt[2] - gt[0]
    rois = np.array([gt, gt + [w / 3, 0, w / 3, 0], gt + [0, w / 4, 0, w / 4]])
    scores = score_all(s, r, rois).scores
    assert scores[0] > scores[1] and scores[0] > scores[2]


def test_refine_all_when_top_k_large(scene_maps):
    _, s, r = scene_maps
    props = score_all(s, r, place(AnchorConfig(scales=(64,))))
    out = refine_step(s, r, props, IMAGE, RefineConfig(top_k=len(props) + 5, output_n=1))
    assert len(out) == len(props)
    assert (out.iteration == 1).all()


def test_zero_regression_is_identity(scene_maps):
    _, s, _ = scene_maps
    zero = FeatureMap(np.zeros((s.height, s.width, 4 * 49)), s.stride)
    props = score_all(s, zero, place(AnchorConfig()))
    out = refine_step(s, zero, props, IMAGE)
    ranked = props.ranked().take(np.arange(len(out)))
    assert out.boxes.tobytes() == ranked.boxes.tobytes()
    assert out.scores.tobytes() == ranked.scores.tobytes()


def test_iterations_zero_is_ranked_scoring(scene_maps):
    _, s, r = scene_maps
    anchors = place(AnchorConfig())
    out = propose(s, r, refine_cfg=RefineConfig(iterations=0))
    want = score_all(s, r, anchors).ranked()
    assert out.boxes.tobytes() == want.boxes[:1000].tobytes()
    assert (out.iteration == 0).all()


def test_propose_contract(scene_maps):
    _, s, r = scene_maps
    out = propose(s, r, refine_cfg=RefineConfig(iterations=2))
    assert len(out) == 1000
    assert (np.diff(out.scores) <= 0).all()
    b = out.boxes
    assert (b >= 0).all() and (b[:, 2] <= 1024).all() and (b[:, 3] <= 1024).all()
    assert ((b[:, 2] - b[:, 0] >= 1) & (b[:, 3] - b[:, 1] >= 1)).all()
    again = propose(s, r, refine_cfg=RefineConfig(iterations=2))
    assert out.boxes.tobytes() == again.boxes.tobytes() and out.scores.tobytes() == again.scores.tobytes()


def test_truncation_consistency(scene_maps):
    _, s, r = scene_maps
    big = propose(s, r, refine_cfg=RefineConfig(output_n=800))
    small = propose(s, r, refine_cfg=RefineConfig(output_n=300))
    assert small.boxes.tobytes() == big.boxes[:300].tobytes()


def test_refinement_monotone_on_oracle_scenes():
    for seed in range(3):
        sc = synth_scene(seed, n_boxes=25)
        s, r = synth_features(sc)
        vals = [mean_top_iou(propose(s, r, refine_cfg=RefineConfig(iterations=i)), sc.gts) for i in range(3)]
        assert vals[0] <= vals[1] <= vals[2]


def test_ten_faces_full_recall():
    for seed in range(100, 105):
        sc = synth_scene(seed, n_boxes=10)
        s, r = synth_features(sc)
        props = soft_nms(propose(s, r))
        assert greedy_match(props.boxes[:1000], sc.gts, 0.5) == 10


def test_uniform_stride_override(scene_maps):
    _, s, r = scene_maps
    coarse = propose(s, r, refine_cfg=RefineConfig(iterations=0, top_k=10**6, output_n=10**6), uniform_stride=64)
    assert len(coarse) == 6 * 16 * 16  # six scales on a 16x16 lattice


def test_refine_needs_deltas(scene_maps):
    _, s, r = scene_maps
    with pytest.raises(ValueError):
        refine_step(s, r, Proposals([[0, 0, 10, 10]], [0.5], 0), IMAGE)
    with pytest.raises(ValueError):
        RefineConfig(top_k=5, output_n=10)
