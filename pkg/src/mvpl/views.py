"""Complementary views of a video clip: RGB, optical flow, temporal gradients.

Flow comes from a coarse-to-fine Horn-Schunck solver minimizing the
brightness-constancy residual plus a smoothness penalty. Both the raw
flow and the raw temporal gradients are converted into 3-channel clips
in the RGB value range so one shared classifier can consume any view.
All deriving functions are pure: identical clip + params -> identical
views, bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

# Horn-Schunck defaults; any solver driving the brightness-constancy
# residual well below its zero-flow value would do.
FLOW_ALPHA = 15.0
FLOW_ITERATIONS = 100
FLOW_LEVELS = 3
_MIN_COARSE_SIZE = 8


@dataclass(frozen=True)
class VideoClip:
    """Dense T x H x W x C value grid in [0, 255]."""

    frames: np.ndarray
    clip_id: int = 0
    frame_stride: int = 1

    def __post_init__(self):
        f = np.asarray(self.frames, dtype=np.float64)
        object.__setattr__(self, "frames", f)
        if f.ndim != 4 or f.shape[3] != 3:
            raise ValueError(f"clip frames must be [T,H,W,3], got {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValueError("clip frames must be finite")
        if f.min() < 0.0 or f.max() > 255.0:
            raise ValueError(f"clip values must lie in [0, 255], got [{f.min()}, {f.max()}]")

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.frames.shape


@dataclass(frozen=True)
class FlowField:
    """(T-1) x H x W x 2 per-pixel velocities (horizontal, vertical), px/frame."""

    displacements: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.displacements, dtype=np.float64)
        object.__setattr__(self, "displacements", d)
        if d.ndim != 4 or d.shape[3] != 2:
            raise ValueError(f"flow must be [T-1,H,W,2], got {d.shape}")
        if not np.all(np.isfinite(d)):
            raise ValueError("flow must be finite")
        bound = max(d.shape[1], d.shape[2])
        if np.abs(d).max() > bound:
            raise ValueError(f"flow magnitude exceeds frame extent {bound}")


@dataclass(frozen=True)
class TemporalGradientClip:
    """T x H x W x C raw frame differences in [-255, 255]; last frame is 0."""

    gradients: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gradients, dtype=np.float64)
        object.__setattr__(self, "gradients", g)
        if g.ndim != 4:
            raise ValueError(f"gradients must be [T,H,W,C], got {g.shape}")
        if np.abs(g).max() > 255.0:
            raise ValueError("temporal gradients must lie in [-255, 255]")


@dataclass(frozen=True)
class ViewSet:
    """The aligned RGB / flow / temporal-gradient views of one clip."""

    rgb: VideoClip
    flow_view: VideoClip
    tg_view: VideoClip

    def __post_init__(self):
        if not (self.rgb.shape == self.flow_view.shape == self.tg_view.shape):
            raise ValueError(
                f"views must share one shape, got rgb {self.rgb.shape}, "
                f"flow {self.flow_view.shape}, tg {self.tg_view.shape}"
            )

    @property
    def clip_id(self) -> int:
        return self.rgb.clip_id

    def view(self, name: str) -> VideoClip:
        try:
            return {"rgb": self.rgb, "flow": self.flow_view, "tg": self.tg_view}[name]
        except KeyError:
            raise ValueError(f"unknown view {name!r}; expected rgb|flow|tg") from None


def to_grayscale(frames: np.ndarray) -> np.ndarray:
    """Luma conversion of [...,3] frames."""
    return frames @ LUMA_WEIGHTS


def _smooth(img: np.ndarray) -> np.ndarray:
    """Separable binomial 5-tap blur over the trailing two axes, edge-replicated."""
    kernel = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
    for axis in (-2, -1):
        padded = np.concatenate(
            [np.take(img, [0, 0], axis=axis), img, np.take(img, [-1, -1], axis=axis)], axis=axis
        )
        acc = np.zeros_like(img)
        for i, kv in enumerate(kernel):
            sl = [slice(None)] * img.ndim
            sl[axis] = slice(i, i + img.shape[axis])
            acc += kv * padded[tuple(sl)]
        img = acc
    return img


def _downsample(img: np.ndarray) -> np.ndarray:
    return _smooth(img)[..., ::2, ::2]


def _bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize trailing two axes with edge-clamped bilinear sampling."""
    in_h, in_w = img.shape[-2], img.shape[-1]
    ys = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    return _sample_grid(img, ys[:, None] + np.zeros(out_w), xs[None, :] + np.zeros((out_h, 1)))


def _sample_grid(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Bilinear sample img[..., y, x] at float coords, clamped to edges."""
    in_h, in_w = img.shape[-2], img.shape[-1]
    ys = np.clip(ys, 0.0, in_h - 1.0)
    xs = np.clip(xs, 0.0, in_w - 1.0)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    fy = ys - y0
    fx = xs - x0
    v00 = img[..., y0, x0]
    v01 = img[..., y0, x1]
    v10 = img[..., y1, x0]
    v11 = img[..., y1, x1]
    top = v00 * (1 - fx) + v01 * fx
    bot = v10 * (1 - fx) + v11 * fx
    return top * (1 - fy) + bot * fy


_HS_NEIGHBOR = np.array([[1 / 12, 1 / 6, 1 / 12], [1 / 6, 0.0, 1 / 6], [1 / 12, 1 / 6, 1 / 12]])


def _neighbor_average(f: np.ndarray) -> np.ndarray:
    padded = np.pad(f, [(0, 0)] * (f.ndim - 2) + [(1, 1), (1, 1)], mode="edge")
    acc = np.zeros_like(f)
    h, w = f.shape[-2], f.shape[-1]
    for dy in range(3):
        for dx in range(3):
            kv = _HS_NEIGHBOR[dy, dx]
            if kv:
                acc += kv * padded[..., dy : dy + h, dx : dx + w]
    return acc


def _spatial_gradients(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gy, gx = np.gradient(img, axis=(-2, -1))
    return gx, gy


def _hs_level(i0: np.ndarray, i1: np.ndarray, u: np.ndarray, v: np.ndarray,
              alpha: float, iterations: int) -> tuple[np.ndarray, np.ndarray]:
    """Jacobi iterations for the flow increment between i0 and i1 warped by (u, v)."""
    h, w = i0.shape[-2], i0.shape[-1]
    base_y, base_x = np.mgrid[0:h, 0:w].astype(np.float64)
    if i0.ndim == 3:
        warped = np.stack(
            [_sample_grid(i1[p], base_y + v[p], base_x + u[p]) for p in range(i0.shape[0])]
        )
    else:
        warped = _sample_grid(i1, base_y + v, base_x + u)
    # where the warp samples outside the frame the data term is meaningless;
    # zero it there so the smoothness term propagates neighbors instead
    sample_y, sample_x = base_y + v, base_x + u
    valid = (sample_y >= 0) & (sample_y <= h - 1) & (sample_x >= 0) & (sample_x <= w - 1)
    ix0, iy0 = _spatial_gradients(i0)
    ix1, iy1 = _spatial_gradients(warped)
    ix = 0.5 * (ix0 + ix1) * valid
    iy = 0.5 * (iy0 + iy1) * valid
    it = (warped - i0) * valid
    denom = alpha * alpha + ix * ix + iy * iy
    du = np.zeros_like(u)
    dv = np.zeros_like(v)
    for _ in range(iterations):
        du_bar = _neighbor_average(du)
        dv_bar = _neighbor_average(dv)
        t = (ix * du_bar + iy * dv_bar + it) / denom
        du = du_bar - ix * t
        dv = dv_bar - iy * t
    return u + du, v + dv


def estimate_flow(
    clip: VideoClip,
    alpha: float = FLOW_ALPHA,
    iterations: int = FLOW_ITERATIONS,
    pyramid_levels: int = FLOW_LEVELS,
) -> FlowField:
    """Per frame-pair Horn-Schunck flow, coarse-to-fine.

    Minimizes the brightness-constancy residual plus alpha * smoothness
    with `iterations` Jacobi sweeps per pyramid level, warping the second
    frame by the upsampled coarse flow between levels. The pyramid depth
    is clamped so the coarsest level keeps at least 8 px on each side.
    """
    t, h, w, _ = clip.shape
    if t < 2:
        raise ValueError(f"flow needs at least 2 frames, got {t}")
    if iterations < 1 or pyramid_levels < 1:
        raise ValueError("iterations and pyramid_levels must be >= 1")
    gray = to_grayscale(clip.frames)  # [T,H,W]
    i0 = gray[:-1]
    i1 = gray[1:]

    levels = 1
    while (
        levels < pyramid_levels
        and min(h, w) // (2 ** levels) >= _MIN_COARSE_SIZE
    ):
        levels += 1
    pyr0, pyr1 = [i0], [i1]
    for _ in range(levels - 1):
        pyr0.append(_downsample(pyr0[-1]))
        pyr1.append(_downsample(pyr1[-1]))

    u = np.zeros_like(pyr0[-1])
    v = np.zeros_like(pyr0[-1])
    for lvl in range(levels - 1, -1, -1):
        a, b = pyr0[lvl], pyr1[lvl]
        if u.shape != a.shape:
            sy = a.shape[-2] / u.shape[-2]
            sx = a.shape[-1] / u.shape[-1]
            u = _bilinear_resize(u, a.shape[-2], a.shape[-1]) * sx
            v = _bilinear_resize(v, a.shape[-2], a.shape[-1]) * sy
        u, v = _hs_level(a, b, u, v, alpha, iterations)

    bound = float(max(h, w))
    disp = np.stack([np.clip(u, -bound, bound), np.clip(v, -bound, bound)], axis=-1)
    return FlowField(disp)


def flow_to_view(flow: FlowField, length: int | None = None) -> VideoClip:
    """Map a flow field to an RGB-range clip.

    Channels 1/2 are the signed horizontal/vertical components mapped by
    (d/D + 1) * 127.5 with D the per-clip max |component| (floor 1e-6);
    channel 3 is the magnitude scaled to [0, 255] by the per-clip max.
    The clip is padded to `length` frames by repeating the last one.
    """
    d = flow.displacements
    if length is None:
        length = d.shape[0] + 1
    if length < d.shape[0]:
        raise ValueError(f"length {length} shorter than flow ({d.shape[0]} frames)")
    comp_max = max(1e-6, float(np.abs(d).max()))
    mag = np.sqrt(d[..., 0] ** 2 + d[..., 1] ** 2)
    mag_max = max(1e-6, float(mag.max()))
    view = np.empty(d.shape[:3] + (3,), dtype=np.float64)
    view[..., 0] = (d[..., 0] / comp_max + 1.0) * 127.5
    view[..., 1] = (d[..., 1] / comp_max + 1.0) * 127.5
    view[..., 2] = mag / mag_max * 255.0
    np.clip(view, 0.0, 255.0, out=view)
    if length > view.shape[0]:
        pad = np.repeat(view[-1:], length - view.shape[0], axis=0)
        view = np.concatenate([view, pad], axis=0)
    return VideoClip(view)


def temporal_gradients(clip: VideoClip) -> TemporalGradientClip:
    """Raw frame differences g_t = V_{t+1} - V_t; the final frame gets 0."""
    t = clip.shape[0]
    if t < 2:
        raise ValueError(f"temporal gradients need at least 2 frames, got {t}")
    g = np.zeros_like(clip.frames)
    g[:-1] = clip.frames[1:] - clip.frames[:-1]
    return TemporalGradientClip(g)


def tg_to_view(tg: TemporalGradientClip) -> VideoClip:
    """Shift raw gradients into [0, 255] via (g + 255) / 2."""
    return VideoClip((tg.gradients + 255.0) / 2.0)


def view_to_tg(view: VideoClip) -> np.ndarray:
    """Invert tg_to_view: raw = 2 * view - 255."""
    return 2.0 * view.frames - 255.0


@dataclass(frozen=True)
class FlowParams:
    alpha: float = FLOW_ALPHA
    iterations: int = FLOW_ITERATIONS
    pyramid_levels: int = FLOW_LEVELS


def build_viewset(
    clip: VideoClip,
    flow_params: FlowParams = FlowParams(),
    precomputed_flow_view: np.ndarray | None = None,
    precomputed_tg_view: np.ndarray | None = None,
) -> ViewSet:
    """Derive all three aligned views of one clip.

    Precomputed view arrays (from a dataset container) short-circuit the
    corresponding derivation; they must match the clip shape.
    """
    if precomputed_flow_view is not None:
        fv = VideoClip(precomputed_flow_view, clip_id=clip.clip_id, frame_stride=clip.frame_stride)
    else:
        flow = estimate_flow(
            clip, flow_params.alpha, flow_params.iterations, flow_params.pyramid_levels
        )
        fv = VideoClip(
            flow_to_view(flow, length=clip.shape[0]).frames,
            clip_id=clip.clip_id,
            frame_stride=clip.frame_stride,
        )
    if precomputed_tg_view is not None:
        tv = VideoClip(precomputed_tg_view, clip_id=clip.clip_id, frame_stride=clip.frame_stride)
    else:
        tv = VideoClip(
            tg_to_view(temporal_gradients(clip)).frames,
            clip_id=clip.clip_id,
            frame_stride=clip.frame_stride,
        )
    return ViewSet(rgb=clip, flow_view=fv, tg_view=tv)
