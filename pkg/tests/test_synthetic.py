import numpy as np
import pytest

from flowmots import synthetic
from flowmots.errors import SpecError
from flowmots.fusion import warp
from flowmots.geometry import BinaryMask, mask_iou
from flowmots.metrics import FrameAnnotations, ObjectAnnotation, match_frame
from flowmots.synthetic import (
    NOISE_PRESETS,
    ObjectSpec,
    PerturbationModel,
    SceneSpec,
    generate_sequence,
    perturb,
)


@pytest.fixture(scope="module")
def seq():
    return generate_sequence(SceneSpec(frames=10, n_objects=4, seed=3))


def test_deterministic(seq):
    other = generate_sequence(SceneSpec(frames=10, n_objects=4, seed=3))
    np.testing.assert_array_equal(seq.labels, other.labels)
    assert seq.objects == other.objects


def test_gt_ids_and_disjoint(seq):
    for t in range(seq.n_frames):
        gt = seq.gt(t)
        gt.validate()
        for o in gt:
            assert o.obj_id // 1000 == o.class_id
            assert o.mask.area > 0


def test_features_orthogonal_signatures(seq):
    f = seq.features(0)
    assert f.shape == (seq.channels, 160, 192)
    np.testing.assert_array_equal((f > 0).sum(axis=0), 1)


def test_gt_flow_reproduces_next_frame(seq):
    # warping frame t-1 rasters with the flow on frame t recovers frame t masks
    for t in range(1, seq.n_frames):
        prev = seq.features(t - 1)
        flow = seq.flow(t - 1, t)
        warped = warp(prev, flow)
        lab = seq.labels[t]
        for k, o in enumerate(seq.objects):
            m = lab == k + 1
            if abs(o.vx) == int(abs(o.vx)) and abs(o.vy) == int(abs(o.vy)):
                np.testing.assert_allclose(warped[k + 1][m], 1.0)
            # away from occlusion and edges most of the object is recovered
            assert warped[k + 1][m].mean() > 0.8


def test_spec_validation():
    with pytest.raises(SpecError):
        ObjectSpec(1, "triangle", 1, 1, 0, 0, 0, 0)
    with pytest.raises(SpecError):
        SceneSpec(frames=0)
    bad = SceneSpec(width=10, height=10, objects=(ObjectSpec(1, "rect", 20, 5, 0, 0, 0, 0),))
    with pytest.raises(SpecError):
        generate_sequence(bad)


def test_spec_dict_roundtrip(seq):
    assert synthetic.spec_from_dict(synthetic.spec_to_dict(seq.spec)) == seq.spec


def test_zero_perturbation_is_identity(seq):
    gt = seq.gt(2)
    det = perturb(gt, PerturbationModel(), 0)
    assert [o.mask for o in det] == [o.mask for o in gt]
    assert all(o.box is not None for o in det)


def test_perturbation_deterministic_and_disjoint(seq):
    model = NOISE_PRESETS["high"]
    for t in range(seq.n_frames):
        a = perturb(seq.gt(t), model, 11)
        b = perturb(seq.gt(t), model, 11)
        assert [(o.obj_id, o.mask, o.box) for o in a] == [(o.obj_id, o.mask, o.box) for o in b]
        a.validate()


def test_miss_all(seq):
    det = perturb(seq.gt(0), PerturbationModel(miss_prob=1.0), 0)
    assert len(det) == 0


def test_medium_noise_keeps_most_matches(seq):
    model = NOISE_PRESETS["medium"]
    m = match_frame(seq.gt(4), perturb(seq.gt(4), model, 1))
    assert len(m.pairs) >= len(seq.gt(4)) - 1


def test_flow_noise_grows_with_gap(seq):
    model = PerturbationModel(flow_noise=0.5, flow_noise_power=2.0)
    err = []
    for gap in (1, 4):
        diffs = [
            np.abs(synthetic.noisy_flow(seq, 8 - gap, 8, model, s) - seq.flow(8 - gap, 8)).max()
            for s in range(10)
        ]
        err.append(np.mean(diffs))
    assert err[1] > 4 * err[0]


def test_bursts_zero_signature():
    model = PerturbationModel(burst_prob=1.0, burst_len=2)
    seq = generate_sequence(SceneSpec(frames=3, n_objects=2, seed=0))
    f = synthetic.noisy_features(seq, 1, model, 0)
    assert f[1:].max() == 0.0


def test_perturbation_validation():
    with pytest.raises(ValueError):
        PerturbationModel(miss_prob=2)
    with pytest.raises(ValueError):
        PerturbationModel(box_scale=0)
    assert PerturbationModel().is_zero
    assert not NOISE_PRESETS["low"].is_zero


def test_static_scene():
    obj = ObjectSpec(1, "rect", 20, 10, 5, 5, 0, 0)
    seq = generate_sequence(SceneSpec(width=40, height=30, frames=3, objects=(obj,)))
    assert [o.mask for o in seq.gt(0)] == [o.mask for o in seq.gt(2)]
    np.testing.assert_array_equal(seq.flow(0, 2), 0.0)


def test_moving_object_warp_interior():
    obj = ObjectSpec(1, "rect", 12, 8, 4, 6, 2, 0)
    seq = generate_sequence(SceneSpec(width=40, height=30, frames=3, objects=(obj,)))
    warped = warp(seq.features(1), seq.flow(1, 2))
    cur = seq.features(2)
    m = seq.labels[2] == 1
    np.testing.assert_array_equal(warped[:, m], cur[:, m])


def test_erode_square():
    a = np.zeros((20, 20), dtype=bool)
    a[5:15, 5:15] = True
    m = BinaryMask.from_array(a)
    gt = FrameAnnotations(0, [ObjectAnnotation(1001, 1, m)])
    (det,) = perturb(gt, PerturbationModel(erode=1), 0).objects
    assert mask_iou(det.mask, m) == 64 / 100
