import numpy as np
import pytest

from mvpl import views as vw
from mvpl.views import FlowField, TemporalGradientClip, VideoClip


def textured_image(h=32, w=32, seed=0):
    """Smooth random texture with strong spatial gradients."""
    rng = np.random.default_rng(seed)
    img = rng.uniform(0.0, 255.0, size=(h, w))
    for _ in range(2):
        img = vw._smooth(img)
    return img


def translating_clip(t=4, h=32, w=32, shift=(1, 0), seed=0):
    """Texture translated by exactly `shift` (dx, dy) px/frame, wrap-around."""
    img = textured_image(h, w, seed)
    frames = []
    for i in range(t):
        rolled = np.roll(img, (i * shift[1], i * shift[0]), axis=(0, 1))
        frames.append(np.repeat(rolled[..., None], 3, axis=-1))
    return VideoClip(np.stack(frames))


def brightness_residual(clip: VideoClip, flow: np.ndarray) -> float:
    """Oracle: mean |Ix*u + Iy*v + It| over interior pixels, central differences."""
    gray = clip.frames @ np.array([0.299, 0.587, 0.114])
    total, count = 0.0, 0
    for t in range(gray.shape[0] - 1):
        gy, gx = np.gradient(gray[t])
        it = gray[t + 1] - gray[t]
        res = gx * flow[t, ..., 0] + gy * flow[t, ..., 1] + it
        interior = res[2:-2, 2:-2]
        total += np.abs(interior).sum()
        count += interior.size
    return total / count


def test_flow_recovers_unit_translation():
    clip = translating_clip(shift=(1, 0))
    flow = vw.estimate_flow(clip)
    err = np.sqrt(
        (flow.displacements[..., 0] - 1.0) ** 2 + flow.displacements[..., 1] ** 2
    )
    assert err.mean() < 0.5, err.mean()


def test_flow_static_clip_is_zero():
    img = np.repeat(textured_image()[..., None], 3, axis=-1)
    clip = VideoClip(np.stack([img] * 3))
    flow = vw.estimate_flow(clip)
    assert np.abs(flow.displacements).max() < 1e-3


def test_flow_residual_beats_zero_flow():
    clip = translating_clip(shift=(1, 0))
    flow = vw.estimate_flow(clip)
    res = brightness_residual(clip, flow.displacements)
    res_zero = brightness_residual(clip, np.zeros_like(flow.displacements))
    assert res <= 0.5 * res_zero, (res, res_zero)


def test_flow_rejects_single_frame():
    clip = VideoClip(np.zeros((1, 8, 8, 3)))
    with pytest.raises(ValueError, match="2 frames"):
        vw.estimate_flow(clip)


def test_flow_to_view_zero_flow():
    view = vw.flow_to_view(FlowField(np.zeros((2, 4, 4, 2))))
    assert view.shape == (3, 4, 4, 3)
    np.testing.assert_array_equal(view.frames[..., 0], 127.5)
    np.testing.assert_array_equal(view.frames[..., 1], 127.5)
    np.testing.assert_array_equal(view.frames[..., 2], 0.0)


def test_flow_to_view_constant_flow():
    d = np.zeros((1, 3, 3, 2))
    d[..., 0] = 2.0
    view = vw.flow_to_view(FlowField(d))
    np.testing.assert_array_equal(view.frames[..., 0], 255.0)
    np.testing.assert_array_equal(view.frames[..., 1], 127.5)
    np.testing.assert_array_equal(view.frames[..., 2], 255.0)


def test_flow_to_view_mixed_field_bounds_and_extreme():
    rng = np.random.default_rng(5)
    d = rng.uniform(-4.0, 4.0, size=(3, 6, 6, 2))
    view = vw.flow_to_view(FlowField(d))
    assert view.frames.min() >= 0.0 and view.frames.max() <= 255.0
    # the pixel holding the largest |component| maps to an endpoint
    flat = np.abs(d).reshape(-1)
    t, y, x, ch = np.unravel_index(flat.argmax(), d.shape)
    assert view.frames[t, y, x, ch] in (0.0, 255.0)


def test_flow_to_view_pads_to_length():
    d = np.zeros((2, 4, 4, 2))
    d[1, ..., 0] = 1.0
    view = vw.flow_to_view(FlowField(d), length=5)
    assert view.shape[0] == 5
    np.testing.assert_array_equal(view.frames[2], view.frames[1])
    np.testing.assert_array_equal(view.frames[4], view.frames[1])


def test_temporal_gradient_arithmetic():
    frames = np.zeros((2, 2, 2, 3))
    frames[0] = 100.0
    frames[1] = 160.0
    tg = vw.temporal_gradients(VideoClip(frames))
    np.testing.assert_array_equal(tg.gradients[0], 60.0)
    np.testing.assert_array_equal(tg.gradients[1], 0.0)
    view = vw.tg_to_view(tg)
    np.testing.assert_array_equal(view.frames[0], 157.5)
    np.testing.assert_array_equal(view.frames[1], 127.5)


def test_temporal_gradient_extremes():
    hi = np.zeros((2, 1, 1, 3))
    hi[0], hi[1] = 255.0, 0.0
    view = vw.tg_to_view(vw.temporal_gradients(VideoClip(hi)))
    np.testing.assert_array_equal(view.frames[0], 0.0)
    lo = np.zeros((2, 1, 1, 3))
    lo[1] = 255.0
    view = vw.tg_to_view(vw.temporal_gradients(VideoClip(lo)))
    np.testing.assert_array_equal(view.frames[0], 255.0)


def test_temporal_gradient_static_clip():
    clip = VideoClip(np.full((3, 4, 4, 3), 77.0))
    view = vw.tg_to_view(vw.temporal_gradients(clip))
    np.testing.assert_array_equal(view.frames, 127.5)


def test_tg_round_trip_is_bit_exact_for_integer_frames():
    rng = np.random.default_rng(9)
    frames = rng.integers(0, 256, size=(5, 6, 6, 3)).astype(np.float64)
    tg = vw.temporal_gradients(VideoClip(frames))
    view = vw.tg_to_view(tg)
    recovered = vw.view_to_tg(view)
    assert np.array_equal(recovered, tg.gradients)


def test_build_viewset_shapes_and_static_case():
    img = np.repeat(textured_image(16, 16)[..., None], 3, axis=-1)
    clip = VideoClip(np.stack([img] * 4), clip_id=7)
    vs = vw.build_viewset(clip)
    assert vs.rgb.shape == vs.flow_view.shape == vs.tg_view.shape == (4, 16, 16, 3)
    assert vs.clip_id == 7
    np.testing.assert_allclose(vs.flow_view.frames[..., 0], 127.5, atol=0.2)
    np.testing.assert_allclose(vs.flow_view.frames[..., 1], 127.5, atol=0.2)
    np.testing.assert_array_equal(vs.tg_view.frames, 127.5)


def test_build_viewset_translating_texture_saturates_flow_channel():
    clip = translating_clip(t=4, shift=(1, 0))
    vs = vw.build_viewset(clip)
    # rightward motion everywhere: channel 1 sits well above neutral 127.5
    # on the whole moving region, with the per-clip max mapping to 255
    inner = vs.flow_view.frames[:3, 4:-4, 4:-4, 0]
    assert inner.min() > 160.0
    assert np.median(inner) > 180.0
    assert vs.flow_view.frames[..., 0].max() == 255.0


def test_viewset_deterministic():
    clip = translating_clip(t=3, h=20, w=20, shift=(1, 0), seed=3)
    a = vw.build_viewset(clip)
    b = vw.build_viewset(clip)
    assert np.array_equal(a.flow_view.frames, b.flow_view.frames)
    assert np.array_equal(a.tg_view.frames, b.tg_view.frames)


def test_viewset_rejects_mismatched_shapes():
    clip = VideoClip(np.full((3, 4, 4, 3), 10.0))
    other = VideoClip(np.full((3, 5, 5, 3), 10.0))
    with pytest.raises(ValueError, match="share one shape"):
        vw.ViewSet(rgb=clip, flow_view=other, tg_view=clip)


def test_converted_views_stay_in_range_fuzz():
    rng = np.random.default_rng(21)
    for _ in range(50):
        t = int(rng.integers(2, 5))
        h = int(rng.integers(4, 10))
        frames = rng.integers(0, 256, size=(t, h, h, 3)).astype(np.float64)
        clip = VideoClip(frames)
        tgv = vw.tg_to_view(vw.temporal_gradients(clip))
        assert tgv.frames.min() >= 0.0 and tgv.frames.max() <= 255.0
        d = rng.uniform(-3, 3, size=(t - 1, h, h, 2))
        fv = vw.flow_to_view(FlowField(d))
        assert fv.frames.min() >= 0.0 and fv.frames.max() <= 255.0
