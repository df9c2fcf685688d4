"""Temporally consistent weak and strong video augmentation.

Weak: horizontal flip (p=0.5) + random resized crop. Strong: the weak
geometry, then two image ops drawn from a fixed pool with a magnitude
in 1..10, then one square cutout. One transform is drawn per
(policy seed, clip id, step) tuple and applied identically to every
frame; geometry is shared across the views of a ViewSet so they stay
aligned, while value-level ops act on each view's own pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .seeding import rng_from
from .views import VideoClip, ViewSet

FILL_VALUE = 127.5  # neutral gray for out-of-frame pixels and cutout

STRONG_OPS = (
    "rotate",
    "translate_x",
    "translate_y",
    "shear_x",
    "shear_y",
    "contrast",
    "brightness",
    "sharpness",
    "posterize",
    "solarize",
)

# magnitude-10 extremes; each op scales linearly with magnitude/10
MAX_ROTATE_DEG = 30.0
MAX_TRANSLATE_FRAC = 0.3
MAX_SHEAR = 0.3
MAX_ENHANCE_DELTA = 0.9  # factor range [0.1, 1.9]
POSTERIZE_BITS = (8, 4)  # from, to
SOLARIZE_RANGE = (255.0, 0.0)


@dataclass(frozen=True)
class AugmentationPolicy:
    """One augmentation family. kind: "weak" | "strong" | "none"."""

    kind: str
    seed: int = 0
    crop_size: int = 24
    scale_range: tuple[float, float] = (256 / 224, 320 / 224)
    ops_per_sample: int = 2
    magnitude_range: tuple[int, int] = (1, 10)
    cutout_ratio: float = 128 / 224

    def __post_init__(self):
        if self.kind not in ("weak", "strong", "none"):
            raise ValueError(f"unknown policy kind {self.kind!r}")
        lo, hi = self.scale_range
        if not 1.0 <= lo <= hi:
            raise ValueError(f"scale range must satisfy 1 <= lo <= hi, got {self.scale_range}")
        mlo, mhi = self.magnitude_range
        if not 1 <= mlo <= mhi <= 10:
            raise ValueError(f"magnitude range must lie in [1, 10], got {self.magnitude_range}")


@dataclass(frozen=True)
class TransformPlan:
    """Everything random about one augmentation, drawn up front."""

    flip: bool
    scale: float
    top_frac: float
    left_frac: float
    ops: tuple[tuple[str, int, int], ...]  # (name, magnitude, sign)
    cutout_top_frac: float
    cutout_left_frac: float


def draw_plan(policy: AugmentationPolicy, clip_id: int, step: int) -> TransformPlan:
    """Deterministic transform draw for (policy.seed, clip_id, step)."""
    rng = rng_from(policy.seed, clip_id, step, "augment-plan")
    flip = bool(rng.random() < 0.5)
    scale = float(rng.uniform(*policy.scale_range))
    top_frac, left_frac = (float(x) for x in rng.random(2))
    mlo, mhi = policy.magnitude_range
    ops = []
    for _ in range(policy.ops_per_sample):
        name = STRONG_OPS[int(rng.integers(0, len(STRONG_OPS)))]
        magnitude = int(rng.integers(mlo, mhi + 1))
        sign = int(rng.integers(0, 2)) * 2 - 1
        ops.append((name, magnitude, sign))
    cut_top, cut_left = (float(x) for x in rng.random(2))
    return TransformPlan(flip, scale, top_frac, left_frac, tuple(ops), cut_top, cut_left)


def horizontal_flip(frames: np.ndarray) -> np.ndarray:
    return frames[:, :, ::-1].copy()


def resize_clip(frames: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize of [T,H,W,C] frames, edge-clamped."""
    h, w = frames.shape[1], frames.shape[2]
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    grid_y = ys[:, None] + np.zeros(out_w)
    grid_x = xs[None, :] + np.zeros((out_h, 1))
    return _sample_bilinear_clamp(frames, grid_y, grid_x)


def center_crops(frames: np.ndarray, crop: int, count: int = 1) -> list[np.ndarray]:
    """`count` square crops after scaling the shorter side to `crop`.

    One crop is central; more are spaced evenly along the longer side.
    """
    t, h, w, c = frames.shape
    zoom = crop / min(h, w)
    new_h, new_w = max(crop, int(round(h * zoom))), max(crop, int(round(w * zoom)))
    scaled = frames if (new_h, new_w) == (h, w) else resize_clip(frames, new_h, new_w)
    crops = []
    span_y, span_x = new_h - crop, new_w - crop
    for i in range(count):
        frac = 0.5 if count == 1 else i / (count - 1)
        top = int(round(frac * span_y))
        left = int(round(frac * span_x))
        crops.append(scaled[:, top : top + crop, left : left + crop, :])
    return crops


def _sample_bilinear_fill(
    frames: np.ndarray, ys: np.ndarray, xs: np.ndarray, fill: float
) -> np.ndarray:
    """Bilinear sample [T,H,W,C] at [Ho,Wo] coords; out-of-frame reads `fill`."""
    t, h, w, c = frames.shape
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    fy = (ys - y0)[None, ..., None]
    fx = (xs - x0)[None, ..., None]

    def corner(yi, xi):
        inside = (yi >= 0) & (yi < h) & (xi >= 0) & (xi < w)
        vals = frames[:, np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1), :]
        return np.where(inside[None, ..., None], vals, fill)

    v00 = corner(y0, x0)
    v01 = corner(y0, x0 + 1)
    v10 = corner(y0 + 1, x0)
    v11 = corner(y0 + 1, x0 + 1)
    top = v00 * (1 - fx) + v01 * fx
    bot = v10 * (1 - fx) + v11 * fx
    return top * (1 - fy) + bot * fy


def _sample_bilinear_clamp(frames: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Edge-replicating bilinear sample of [T,H,W,C] at [Ho,Wo] coords."""
    t, h, w, c = frames.shape
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[None, ..., None]
    fx = (xs - x0)[None, ..., None]
    top = frames[:, y0, x0, :] * (1 - fx) + frames[:, y0, x1, :] * fx
    bot = frames[:, y1, x0, :] * (1 - fx) + frames[:, y1, x1, :] * fx
    return top * (1 - fy) + bot * fy


def _apply_geometry(frames: np.ndarray, plan: TransformPlan, crop: int) -> np.ndarray:
    """Flip + scale shorter side to round(scale*crop) + crop of crop^2."""
    t, h, w, c = frames.shape
    if min(h, w) < crop:
        raise ValueError(f"crop target {crop} larger than input {h}x{w}")
    if plan.flip:
        frames = frames[:, :, ::-1]
    target_short = int(round(plan.scale * crop))
    zoom = target_short / min(h, w)
    new_h = max(crop, int(round(h * zoom)))
    new_w = max(crop, int(round(w * zoom)))
    top = int(math.floor(plan.top_frac * (new_h - crop + 1)))
    left = int(math.floor(plan.left_frac * (new_w - crop + 1)))
    top = min(top, new_h - crop)
    left = min(left, new_w - crop)
    iy = np.arange(crop) + top
    ix = np.arange(crop) + left
    ys = (iy + 0.5) * (h / new_h) - 0.5
    xs = (ix + 0.5) * (w / new_w) - 0.5
    grid_y = ys[:, None] + np.zeros(crop)
    grid_x = xs[None, :] + np.zeros((crop, 1))
    return _sample_bilinear_clamp(frames, grid_y, grid_x)


def _affine_warp(frames: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Warp every frame by an output->input affine map, filling with gray."""
    t, h, w, c = frames.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    xin = matrix[0, 0] * xx + matrix[0, 1] * yy + matrix[0, 2]
    yin = matrix[1, 0] * xx + matrix[1, 1] * yy + matrix[1, 2]
    return _sample_bilinear_fill(frames, yin, xin, FILL_VALUE)


def _center_affine(a: float, b: float, c: float, d: float, h: int, w: int,
                   tx: float = 0.0, ty: float = 0.0) -> np.ndarray:
    """Affine about the frame center plus a translation, output->input."""
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    m = np.array([[a, b, 0.0], [c, d, 0.0]])
    m[0, 2] = cx - a * cx - b * cy - tx
    m[1, 2] = cy - c * cx - d * cy - ty
    return m


def rotate(frames: np.ndarray, degrees: float) -> np.ndarray:
    rad = math.radians(degrees)
    cos, sin = math.cos(rad), math.sin(rad)
    # output->input rotation is the inverse (angle negated)
    h, w = frames.shape[1], frames.shape[2]
    return _affine_warp(frames, _center_affine(cos, sin, -sin, cos, h, w))


def translate(frames: np.ndarray, dx: float, dy: float) -> np.ndarray:
    h, w = frames.shape[1], frames.shape[2]
    return _affine_warp(frames, _center_affine(1.0, 0.0, 0.0, 1.0, h, w, tx=dx, ty=dy))


def shear(frames: np.ndarray, sx: float, sy: float) -> np.ndarray:
    h, w = frames.shape[1], frames.shape[2]
    return _affine_warp(frames, _center_affine(1.0, sx, sy, 1.0, h, w))


def _clip_range(frames: np.ndarray) -> np.ndarray:
    return np.clip(frames, 0.0, 255.0)


def contrast(frames: np.ndarray, factor: float) -> np.ndarray:
    gray_mean = float((frames @ np.array([0.299, 0.587, 0.114])).mean())
    return _clip_range(gray_mean + factor * (frames - gray_mean))


def brightness(frames: np.ndarray, factor: float) -> np.ndarray:
    return _clip_range(frames * factor)


def sharpness(frames: np.ndarray, factor: float) -> np.ndarray:
    kernel = np.array([[1.0, 1.0, 1.0], [1.0, 5.0, 1.0], [1.0, 1.0, 1.0]]) / 13.0
    padded = np.pad(frames, ((0, 0), (1, 1), (1, 1), (0, 0)), mode="edge")
    blur = np.zeros_like(frames)
    h, w = frames.shape[1], frames.shape[2]
    for dy in range(3):
        for dx in range(3):
            blur += kernel[dy, dx] * padded[:, dy : dy + h, dx : dx + w, :]
    return _clip_range(blur + factor * (frames - blur))


def posterize(frames: np.ndarray, bits: int) -> np.ndarray:
    if bits >= 8:
        return frames.copy()
    step = 2 ** (8 - bits)
    return np.floor(np.floor(frames) / step) * step


def solarize(frames: np.ndarray, threshold: float) -> np.ndarray:
    return np.where(frames >= threshold, 255.0 - frames, frames)


def cutout(frames: np.ndarray, ratio: float, top_frac: float, left_frac: float) -> np.ndarray:
    """Square gray patch at one location shared by all frames."""
    side_px = frames.shape[1]
    side = math.ceil(ratio * side_px)
    side = min(side, side_px)
    top = min(int(math.floor(top_frac * (side_px - side + 1))), side_px - side)
    left = min(int(math.floor(left_frac * (frames.shape[2] - side + 1))), frames.shape[2] - side)
    out = frames.copy()
    out[:, top : top + side, left : left + side, :] = FILL_VALUE
    return out


def _apply_strong_op(frames: np.ndarray, name: str, magnitude: int, sign: int) -> np.ndarray:
    frac = magnitude / 10.0
    h, w = frames.shape[1], frames.shape[2]
    if name == "rotate":
        return rotate(frames, sign * MAX_ROTATE_DEG * frac)
    if name == "translate_x":
        return translate(frames, sign * MAX_TRANSLATE_FRAC * frac * w, 0.0)
    if name == "translate_y":
        return translate(frames, 0.0, sign * MAX_TRANSLATE_FRAC * frac * h)
    if name == "shear_x":
        return shear(frames, sign * MAX_SHEAR * frac, 0.0)
    if name == "shear_y":
        return shear(frames, 0.0, sign * MAX_SHEAR * frac)
    if name == "contrast":
        return contrast(frames, 1.0 + sign * MAX_ENHANCE_DELTA * frac)
    if name == "brightness":
        return brightness(frames, 1.0 + sign * MAX_ENHANCE_DELTA * frac)
    if name == "sharpness":
        return sharpness(frames, 1.0 + sign * MAX_ENHANCE_DELTA * frac)
    if name == "posterize":
        hi, lo = POSTERIZE_BITS
        return posterize(frames, int(round(hi - (hi - lo) * frac)))
    if name == "solarize":
        hi, lo = SOLARIZE_RANGE
        return solarize(frames, hi - (hi - lo) * frac)
    raise ValueError(f"unknown strong op {name!r}")


def op_parameters(name: str, magnitude: int, sign: int) -> dict:
    """The concrete parameter an op will use, for transform records."""
    frac = magnitude / 10.0
    if name == "rotate":
        return {"degrees": sign * MAX_ROTATE_DEG * frac}
    if name in ("translate_x", "translate_y"):
        return {"shift_frac": sign * MAX_TRANSLATE_FRAC * frac}
    if name in ("shear_x", "shear_y"):
        return {"shear": sign * MAX_SHEAR * frac}
    if name in ("contrast", "brightness", "sharpness"):
        return {"factor": 1.0 + sign * MAX_ENHANCE_DELTA * frac}
    if name == "posterize":
        hi, lo = POSTERIZE_BITS
        return {"bits": int(round(hi - (hi - lo) * frac))}
    if name == "solarize":
        hi, lo = SOLARIZE_RANGE
        return {"threshold": hi - (hi - lo) * frac}
    raise ValueError(f"unknown strong op {name!r}")


@dataclass(frozen=True)
class TransformRecord:
    """Per-frame parameters of an applied transform; frames always agree."""

    plan: TransformPlan
    per_frame: tuple[tuple, ...]


def transform_record(
    policy: AugmentationPolicy, clip_id: int, step: int, n_frames: int
) -> TransformRecord:
    plan = draw_plan(policy, clip_id, step)
    described = tuple(
        (name, magnitude, op_parameters(name, magnitude, sign))
        for name, magnitude, sign in plan.ops
    )
    frame_entry = (plan.flip, plan.scale, described)
    return TransformRecord(plan, tuple(frame_entry for _ in range(n_frames)))


def _reclip(view: VideoClip, frames: np.ndarray) -> VideoClip:
    return VideoClip(_clip_range(frames), clip_id=view.clip_id, frame_stride=view.frame_stride)


def weak_augment(
    view: VideoClip, policy: AugmentationPolicy, clip_id: int | None = None, step: int = 0
) -> VideoClip:
    """Flip (p=0.5) then random resized crop to policy.crop_size."""
    if policy.kind == "none":
        return view
    cid = view.clip_id if clip_id is None else clip_id
    plan = draw_plan(policy, cid, step)
    return _reclip(view, _apply_geometry(view.frames, plan, policy.crop_size))


def strong_augment(
    view: VideoClip, policy: AugmentationPolicy, clip_id: int | None = None, step: int = 0
) -> VideoClip:
    """Weak geometry, then the drawn op sequence, then cutout."""
    if policy.kind == "none":
        return view
    cid = view.clip_id if clip_id is None else clip_id
    plan = draw_plan(policy, cid, step)
    frames = _apply_geometry(view.frames, plan, policy.crop_size)
    for name, magnitude, sign in plan.ops:
        frames = _apply_strong_op(frames, name, magnitude, sign)
    frames = cutout(frames, policy.cutout_ratio, plan.cutout_top_frac, plan.cutout_left_frac)
    return _reclip(view, frames)


def _augment_viewset(viewset: ViewSet, policy: AugmentationPolicy, step: int) -> ViewSet:
    if policy.kind == "none":
        return viewset
    fn = strong_augment if policy.kind == "strong" else weak_augment
    cid = viewset.clip_id
    return ViewSet(
        rgb=fn(viewset.rgb, policy, clip_id=cid, step=step),
        flow_view=fn(viewset.flow_view, policy, clip_id=cid, step=step),
        tg_view=fn(viewset.tg_view, policy, clip_id=cid, step=step),
    )


def paired_augment(
    viewset: ViewSet,
    weak_policy: AugmentationPolicy,
    strong_policy: AugmentationPolicy,
    step: int = 0,
) -> tuple[ViewSet, ViewSet]:
    """Weakly and strongly augmented copies of a ViewSet.

    Within each output the transform is drawn once per clip, so geometry
    (flip, crop, any affine op) is identical across the three views;
    value-level ops run on each view's own pixels.
    """
    return _augment_viewset(viewset, weak_policy, step), _augment_viewset(
        viewset, strong_policy, step
    )
