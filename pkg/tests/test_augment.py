import numpy as np
import pytest

from mvpl import augment as aug
from mvpl.augment import AugmentationPolicy
from mvpl.views import VideoClip, ViewSet


def gradient_clip(t=4, h=32, w=32, clip_id=0):
    yy, xx = np.mgrid[0:h, 0:w]
    base = (yy * 7 + xx * 3) % 251
    frames = np.stack([np.clip(base + 2.0 * i, 0, 255) for i in range(t)])
    return VideoClip(np.repeat(frames[..., None], 3, axis=-1), clip_id=clip_id)


def as_viewset(clip):
    return ViewSet(rgb=clip, flow_view=VideoClip(clip.frames.copy(), clip_id=clip.clip_id),
                   tg_view=VideoClip(clip.frames.copy(), clip_id=clip.clip_id))


def test_flip_is_an_involution():
    clip = gradient_clip()
    once = aug.horizontal_flip(clip.frames)
    np.testing.assert_array_equal(aug.horizontal_flip(once), clip.frames)


def test_weak_augment_shape_contract():
    policy = AugmentationPolicy(kind="weak", seed=5, crop_size=24)
    out = aug.weak_augment(gradient_clip(), policy, step=3)
    assert out.shape == (4, 24, 24, 3)


def test_weak_augment_preserves_constant_clips():
    clip = VideoClip(np.full((3, 30, 30, 3), 93.0))
    policy = AugmentationPolicy(kind="weak", seed=1, crop_size=20)
    for step in range(4):
        out = aug.weak_augment(clip, policy, step=step)
        np.testing.assert_allclose(out.frames, 93.0, atol=1e-12)


def test_weak_augment_rejects_small_inputs():
    clip = VideoClip(np.zeros((2, 10, 10, 3)))
    policy = AugmentationPolicy(kind="weak", crop_size=24)
    with pytest.raises(ValueError, match="crop target"):
        aug.weak_augment(clip, policy)


def test_magnitude_ten_rotate_is_thirty_degrees_every_frame():
    clip = gradient_clip(t=3)
    params = aug.op_parameters("rotate", 10, 1)
    assert params == {"degrees": 30.0}
    out = aug._apply_strong_op(clip.frames, "rotate", 10, 1)
    direct = aug.rotate(clip.frames, 30.0)
    np.testing.assert_array_equal(out, direct)
    # one frame rotated alone matches its slot in the batched result
    alone = aug.rotate(clip.frames[1:2], 30.0)
    np.testing.assert_array_equal(out[1:2], alone)


def test_solarize_above_range_is_identity():
    clip = gradient_clip(t=2)
    out = aug.solarize(clip.frames, 256.0)
    np.testing.assert_array_equal(out, clip.frames)


def test_solarize_inverts_at_zero_threshold():
    frames = np.full((1, 2, 2, 3), 200.0)
    np.testing.assert_array_equal(aug.solarize(frames, 0.0), 55.0)


def test_posterize_reduces_levels():
    frames = np.arange(256, dtype=float).reshape(1, 16, 16, 1)
    frames = np.repeat(frames, 3, axis=-1)
    out = aug.posterize(frames, 4)
    assert set(np.unique(out)) <= {i * 16.0 for i in range(16)}
    np.testing.assert_array_equal(aug.posterize(frames, 8), frames)


def test_cutout_region_is_gray_and_shared_across_frames():
    frames = np.full((4, 28, 28, 3), 200.0)
    out = aug.cutout(frames, ratio=0.5, top_frac=0.3, left_frac=0.7)
    gray = np.isclose(out, aug.FILL_VALUE).all(axis=-1)
    for t in range(1, 4):
        np.testing.assert_array_equal(gray[t], gray[0])
    side = int(np.ceil(0.5 * 28))
    assert gray[0].sum() == side * side
    ys, xs = np.where(gray[0])
    assert ys.max() - ys.min() + 1 == side
    assert xs.max() - xs.min() + 1 == side


def test_strong_augment_cutout_region_only_gray():
    clip = gradient_clip()
    policy = AugmentationPolicy(kind="strong", seed=9, crop_size=24)
    plan = aug.draw_plan(policy, clip.clip_id, step=0)
    out = aug.strong_augment(clip, policy, step=0)
    side = int(np.ceil(policy.cutout_ratio * 24))
    top = min(int(np.floor(plan.cutout_top_frac * (24 - side + 1))), 24 - side)
    left = min(int(np.floor(plan.cutout_left_frac * (24 - side + 1))), 24 - side)
    region = out.frames[:, top : top + side, left : left + side, :]
    np.testing.assert_array_equal(region, aug.FILL_VALUE)


def test_strong_augment_stays_in_range():
    rng = np.random.default_rng(0)
    policy = AugmentationPolicy(kind="strong", seed=2, crop_size=16)
    for step in range(12):
        frames = rng.integers(0, 256, size=(3, 20, 20, 3)).astype(float)
        out = aug.strong_augment(VideoClip(frames, clip_id=step), policy, step=step)
        assert out.frames.min() >= 0.0 and out.frames.max() <= 255.0


def test_paired_augment_shares_geometry_across_views():
    clip = gradient_clip(clip_id=11)
    vs = as_viewset(clip)
    weak = AugmentationPolicy(kind="weak", seed=3, crop_size=24)
    strong = AugmentationPolicy(kind="strong", seed=4, crop_size=24)
    wvs, svs = aug.paired_augment(vs, weak, strong, step=5)
    # identical input content + shared geometry => identical weak outputs
    np.testing.assert_array_equal(wvs.rgb.frames, wvs.flow_view.frames)
    np.testing.assert_array_equal(wvs.rgb.frames, wvs.tg_view.frames)
    np.testing.assert_array_equal(svs.rgb.frames, svs.flow_view.frames)


def test_paired_augment_none_policy_is_identity():
    vs = as_viewset(gradient_clip())
    none = AugmentationPolicy(kind="none")
    wvs, svs = aug.paired_augment(vs, none, none, step=2)
    assert wvs is vs and svs is vs


def test_paired_augment_deterministic():
    vs = as_viewset(gradient_clip(clip_id=21))
    weak = AugmentationPolicy(kind="weak", seed=7, crop_size=24)
    strong = AugmentationPolicy(kind="strong", seed=8, crop_size=24)
    a_w, a_s = aug.paired_augment(vs, weak, strong, step=9)
    b_w, b_s = aug.paired_augment(vs, weak, strong, step=9)
    np.testing.assert_array_equal(a_w.rgb.frames, b_w.rgb.frames)
    np.testing.assert_array_equal(a_s.rgb.frames, b_s.rgb.frames)
    c_w, _ = aug.paired_augment(vs, weak, strong, step=10)
    assert not np.array_equal(a_w.rgb.frames, c_w.rgb.frames)


def test_transform_record_parameters_identical_per_frame():
    policy = AugmentationPolicy(kind="strong", seed=6, crop_size=24)
    record = aug.transform_record(policy, clip_id=3, step=1, n_frames=6)
    assert len(record.per_frame) == 6
    assert all(entry == record.per_frame[0] for entry in record.per_frame)
    assert len(record.plan.ops) == policy.ops_per_sample
    for name, magnitude, _sign in record.plan.ops:
        assert name in aug.STRONG_OPS
        assert 1 <= magnitude <= 10
