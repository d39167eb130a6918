import numpy as np
import pytest

from flowmots.errors import ShapeError
from flowmots.fusion import (
    EmbeddingProjector,
    downsample_flow,
    flow_guided_fusion,
    fuse,
    fusion_weights,
    pixel_cosine,
    warp,
)

from oracles import warp_oracle


def test_zero_flow_is_identity():
    rng = np.random.default_rng(1)
    f = rng.normal(size=(3, 8, 8))
    np.testing.assert_array_equal(warp(f, np.zeros((2, 8, 8))), f)


def test_integer_shift():
    f = np.arange(16, dtype=float).reshape(1, 4, 4)
    flow = np.zeros((2, 4, 4))
    flow[0] = 1.0  # read one column to the right
    out = warp(f, flow)
    np.testing.assert_array_equal(out[0, :, :3], f[0, :, 1:])
    np.testing.assert_array_equal(out[0, :, 3], 0.0)


def test_half_pixel_shift_averages():
    f = np.arange(16, dtype=float).reshape(1, 4, 4)
    flow = np.zeros((2, 4, 4))
    flow[0] = 0.5
    out = warp(f, flow)
    np.testing.assert_allclose(out[0, :, :3], (f[0, :, :3] + f[0, :, 1:]) / 2)


@pytest.mark.parametrize("seed", range(5))
def test_warp_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    f = rng.normal(size=(2, 8, 8))
    flow = rng.uniform(-3, 3, size=(2, 8, 8))
    np.testing.assert_allclose(warp(f, flow), warp_oracle(f, flow), atol=1e-9)


def test_warp_shape_errors():
    with pytest.raises(ShapeError):
        warp(np.zeros((1, 4, 4)), np.zeros((2, 4, 5)))
    with pytest.raises(ShapeError):
        warp(np.zeros((4, 4)), np.zeros((2, 4, 4)))
    with pytest.raises(ValueError):
        warp(np.full((1, 2, 2), np.nan), np.zeros((2, 2, 2)))


def test_downsample_flow():
    flow = np.ones((2, 8, 8)) * 4.0
    out = downsample_flow(flow, 2)
    assert out.shape == (2, 4, 4)
    np.testing.assert_allclose(out, 2.0)
    with pytest.raises(ShapeError):
        downsample_flow(np.zeros((2, 5, 4)), 2)


def test_projector_cosine_matches_explicit():
    rng = np.random.default_rng(3)
    proj = EmbeddingProjector(5, dim=4, seed=2)
    a = rng.normal(size=(5, 6, 7))
    b = rng.normal(size=(5, 6, 7))
    np.testing.assert_allclose(proj.cosine(a, b), pixel_cosine(proj(a), proj(b)), atol=1e-12)
    z = np.zeros_like(a)
    np.testing.assert_array_equal(proj.cosine(a, z), 0.0)


def test_projector_deterministic():
    np.testing.assert_array_equal(
        EmbeddingProjector(3, 8, seed=5).matrix, EmbeddingProjector(3, 8, seed=5).matrix
    )
    with pytest.raises(ValueError):
        EmbeddingProjector.from_matrix(np.zeros((2, 2)))


@pytest.mark.parametrize("include_current", [False, True])
def test_weights_sum_to_one(include_current):
    rng = np.random.default_rng(4)
    cur = rng.normal(size=(3, 8, 8))
    warped = [rng.normal(size=(3, 8, 8)) for _ in range(4)]
    proj = EmbeddingProjector(3, 6)
    w = fusion_weights(warped, cur, proj, include_current)
    assert len(w) == 4 + include_current
    np.testing.assert_allclose(np.sum(w, axis=0), 1.0, atol=1e-9)
    assert all((x > 0).all() for x in w)


def test_identical_frames_get_equal_weight():
    cur = np.random.default_rng(0).normal(size=(2, 5, 5))
    w = fusion_weights([cur, cur, cur], cur, EmbeddingProjector(2, 4))
    for x in w:
        np.testing.assert_allclose(x, 1 / 3)


def test_fuse_adds_current_with_unit_weight():
    cur = np.ones((1, 2, 2))
    g = np.full((1, 2, 2), 2.0)
    out = fuse([g, g], [np.full((2, 2), 0.5)] * 2, cur)
    np.testing.assert_allclose(out, 3.0)
    out = fuse([g], [np.full((2, 2), 0.25), np.full((2, 2), 0.75)], cur, include_current=True)
    np.testing.assert_allclose(out, 0.25 * 2 + 0.75)
    with pytest.raises(ShapeError):
        fuse([g], [], cur)


def test_fusion_empty_context_copies_current():
    cur = np.ones((2, 3, 3))
    out = flow_guided_fusion([], cur, EmbeddingProjector(2))
    np.testing.assert_array_equal(out, cur)
    assert out is not cur


def test_channel_mismatch():
    with pytest.raises(ShapeError):
        fusion_weights([np.zeros((3, 2, 2))], np.zeros((3, 2, 2)), EmbeddingProjector(4))


def test_uniform_flow_on_ramp():
    f = np.broadcast_to(np.arange(6, dtype=float), (1, 6, 6)).copy()
    flow = np.zeros((2, 6, 6))
    flow[0] = 1.0
    out = warp(f, flow)
    np.testing.assert_allclose(out[0, :, :5], f[0, :, :5] + 1)


def test_downsample_ramp_flow_scaled_by_half():
    x = np.arange(8, dtype=float)
    flow = np.stack([np.broadcast_to(x, (8, 8)), np.zeros((8, 8))])
    out = downsample_flow(flow, 2)
    centers = (np.arange(4) + 0.5) * 2 - 0.5
    np.testing.assert_allclose(out[0], np.broadcast_to(centers * 0.5, (4, 4)))


def test_single_identical_frame_doubles():
    cur = np.random.default_rng(2).normal(size=(2, 4, 4))
    out = flow_guided_fusion([(cur, np.zeros((2, 4, 4)))], cur, EmbeddingProjector(2))
    np.testing.assert_allclose(out, 2 * cur)
