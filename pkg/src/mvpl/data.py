"""Synthetic motion-class videos, split construction, and the clip container.

Eight classes are defined purely by how shapes move (translate in four
directions, rotate either way about the frame center, expand, contract).
Shape type, color, position, size and the background texture are drawn
identically for every class, so a single frame carries no label signal;
only the temporal structure does. Translation clips store their constant
ground-truth velocity.

Container file layout (little endian):
    magic "MVPL" | u32 version | u64 meta length | meta JSON | payload
The meta JSON carries an "arrays" table mapping names to payload-relative
offsets of raw float64 C-order blocks. Datasets and model checkpoints
share this layout, distinguished by meta["kind"].
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .seeding import rng_from
from .views import FlowParams, VideoClip, ViewSet, build_viewset

CLASSES = (
    "left",
    "right",
    "up",
    "down",
    "clockwise",
    "counterclockwise",
    "expand",
    "contract",
)

MAGIC = b"MVPL"
VERSION = 1
VIEW_NAMES = ("flow", "tg")


class ContainerError(Exception):
    """Base class for container file problems."""


class ContainerMagicError(ContainerError):
    pass


class ContainerVersionError(ContainerError):
    pass


class ContainerTruncatedError(ContainerError):
    pass


# ---------------------------------------------------------------------------
# dataset spec and manifest


@dataclass(frozen=True)
class MotionShapesSpec:
    frames: int = 8
    height: int = 32
    width: int = 32
    shapes_min: int = 1
    shapes_max: int = 2
    noise_sigma: float = 4.0
    speed_range: tuple[float, float] = (0.8, 1.6)  # px/frame for translations
    omega_range: tuple[float, float] = (0.10, 0.20)  # rad/frame for rotations
    scale_rate_range: tuple[float, float] = (1.07, 1.15)  # per-frame factor

    def __post_init__(self):
        if self.frames < 2:
            raise ValueError("clips need at least 2 frames")
        if min(self.height, self.width) < 12:
            raise ValueError("frames must be at least 12 px on a side")
        if not 1 <= self.shapes_min <= self.shapes_max:
            raise ValueError("need 1 <= shapes_min <= shapes_max")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be >= 0")


@dataclass(frozen=True)
class ClipRecord:
    clip_id: int
    label: int
    class_name: str
    split: str  # "train" | "eval"
    labeled: bool
    motion: dict
    shape: tuple[int, int, int, int]


@dataclass(frozen=True)
class DatasetManifest:
    seed: int
    spec: MotionShapesSpec
    records: tuple[ClipRecord, ...]

    def train_ids(self) -> list[int]:
        return [r.clip_id for r in self.records if r.split == "train"]

    def labeled_train_ids(self) -> list[int]:
        return [r.clip_id for r in self.records if r.split == "train" and r.labeled]

    def eval_ids(self) -> list[int]:
        return [r.clip_id for r in self.records if r.split == "eval"]

    def record(self, clip_id: int) -> ClipRecord:
        rec = self.records[clip_id]
        if rec.clip_id != clip_id:  # records are id-ordered by construction
            raise KeyError(f"manifest records out of order at id {clip_id}")
        return rec

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "spec": dataclasses.asdict(self.spec),
            "records": [dataclasses.asdict(r) for r in self.records],
        }

    @staticmethod
    def from_json_dict(d: dict) -> "DatasetManifest":
        spec_d = dict(d["spec"])
        for key in ("speed_range", "omega_range", "scale_rate_range"):
            spec_d[key] = tuple(spec_d[key])
        records = tuple(
            ClipRecord(
                clip_id=r["clip_id"],
                label=r["label"],
                class_name=r["class_name"],
                split=r["split"],
                labeled=r["labeled"],
                motion=r["motion"],
                shape=tuple(r["shape"]),
            )
            for r in d["records"]
        )
        return DatasetManifest(seed=d["seed"], spec=MotionShapesSpec(**spec_d), records=records)


@dataclass
class Dataset:
    manifest: DatasetManifest
    clips: dict[int, np.ndarray]
    views: dict[int, dict[str, np.ndarray]] = field(default_factory=dict)

    def clip(self, clip_id: int) -> VideoClip:
        return VideoClip(self.clips[clip_id], clip_id=clip_id)

    def has_views(self) -> bool:
        return bool(self.views) and all(
            set(self.views.get(i, ())) >= set(VIEW_NAMES) for i in self.clips
        )

    def viewset(self, clip_id: int, flow_params: FlowParams = FlowParams()) -> ViewSet:
        pv = self.views.get(clip_id, {})
        return build_viewset(
            self.clip(clip_id),
            flow_params,
            precomputed_flow_view=pv.get("flow"),
            precomputed_tg_view=pv.get("tg"),
        )

    def with_manifest(self, manifest: DatasetManifest) -> "Dataset":
        return Dataset(manifest=manifest, clips=self.clips, views=self.views)


# ---------------------------------------------------------------------------
# rendering


def _shape_distance(kind: str, yy, xx, cy, cx, radius, angle):
    dy = yy - cy
    dx = xx - cx
    if kind == "disc":
        return np.sqrt(dy * dy + dx * dx) - radius
    if kind == "diamond":
        angle = angle + np.pi / 4.0
    # oriented box: rotate into shape coordinates
    cos_a, sin_a = np.cos(-angle), np.sin(-angle)
    qx = cos_a * dx - sin_a * dy
    qy = sin_a * dx + cos_a * dy
    return np.maximum(np.abs(qx), np.abs(qy)) - radius


_SHAPE_KINDS = ("disc", "square", "diamond")


def _motion_params(class_name: str, rng, spec: MotionShapesSpec) -> dict:
    if class_name in ("left", "right", "up", "down"):
        speed = float(rng.uniform(*spec.speed_range))
        velocity = {
            "left": (-speed, 0.0),
            "right": (speed, 0.0),
            "up": (0.0, -speed),
            "down": (0.0, speed),
        }[class_name]
        return {"kind": "translate", "speed": speed, "velocity": list(velocity)}
    if class_name in ("clockwise", "counterclockwise"):
        omega = float(rng.uniform(*spec.omega_range))
        if class_name == "counterclockwise":
            omega = -omega
        return {"kind": "rotate", "omega": omega}
    rate = float(rng.uniform(*spec.scale_rate_range))
    if class_name == "contract":
        rate = 1.0 / rate
    return {"kind": "scale", "rate": rate}


def render_clip(spec: MotionShapesSpec, class_name: str, rng) -> tuple[np.ndarray, dict]:
    """One clip of moving shapes plus its ground-truth motion parameters.

    Appearance (background, shape type/color/size/position/orientation)
    is drawn before the class-dependent motion parameters, so frame-0
    marginals are identical across classes by construction. Frames are
    rounded to integer gray levels like 8-bit video.
    """
    t, h, w = spec.frames, spec.height, spec.width
    short = min(h, w)
    base_gray = rng.uniform(105.0, 150.0)
    noise = rng.normal(0.0, spec.noise_sigma, size=(h, w))
    background = np.clip(base_gray + noise, 0.0, 255.0)

    n_shapes = int(rng.integers(spec.shapes_min, spec.shapes_max + 1))
    shapes = []
    for _ in range(n_shapes):
        kind = _SHAPE_KINDS[int(rng.integers(0, len(_SHAPE_KINDS)))]
        color = rng.uniform(40.0, 215.0, size=3)
        radius = rng.uniform(0.12, 0.22) * short
        dist = rng.uniform(0.15, 0.32) * short
        theta = rng.uniform(0.0, 2.0 * np.pi)
        orient = rng.uniform(0.0, 2.0 * np.pi)
        shapes.append((kind, color, radius, dist, theta, orient))

    motion = _motion_params(class_name, rng, spec)
    cy0, cx0 = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    frames = np.empty((t, h, w, 3))
    for ti in range(t):
        frame = np.repeat(background[..., None], 3, axis=-1)
        for kind, color, radius, dist, theta, orient in shapes:
            if motion["kind"] == "translate":
                vx, vy = motion["velocity"]
                cx = cx0 + dist * np.cos(theta) + vx * ti
                cy = cy0 + dist * np.sin(theta) + vy * ti
                rad, ang = radius, orient
            elif motion["kind"] == "rotate":
                phi = theta + motion["omega"] * ti
                cx = cx0 + dist * np.cos(phi)
                cy = cy0 + dist * np.sin(phi)
                rad, ang = radius, orient + motion["omega"] * ti
            else:  # scale
                factor = motion["rate"] ** ti
                cx = cx0 + dist * factor * np.cos(theta)
                cy = cy0 + dist * factor * np.sin(theta)
                rad, ang = radius * factor, orient
            d = _shape_distance(kind, yy, xx, cy, cx, rad, ang)
            alpha = np.clip(0.5 - d, 0.0, 1.0)[..., None]
            frame = frame * (1.0 - alpha) + color * alpha
        frames[ti] = frame
    return np.clip(np.round(frames), 0.0, 255.0), motion


def generate(
    spec: MotionShapesSpec,
    n_per_class: int,
    seed: int,
    eval_per_class: int = 16,
) -> Dataset:
    """Deterministic dataset: n_per_class train + eval_per_class eval clips per class."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    if eval_per_class < 1:
        raise ValueError("eval_per_class must be >= 1")
    records = []
    clips: dict[int, np.ndarray] = {}
    clip_id = 0
    for split, count in (("train", n_per_class), ("eval", eval_per_class)):
        for i in range(count * len(CLASSES)):
            label = i % len(CLASSES)
            class_name = CLASSES[label]
            rng = rng_from(seed, "clip", clip_id)
            frames, motion = render_clip(spec, class_name, rng)
            clips[clip_id] = frames
            records.append(
                ClipRecord(
                    clip_id=clip_id,
                    label=label,
                    class_name=class_name,
                    split=split,
                    labeled=split == "train",  # until make_splits narrows it
                    motion=motion,
                    shape=frames.shape,
                )
            )
            clip_id += 1
    manifest = DatasetManifest(seed=seed, spec=spec, records=tuple(records))
    return Dataset(manifest=manifest, clips=clips)


def make_splits(manifest: DatasetManifest, labeled_fraction: float, seed: int) -> DatasetManifest:
    """Class-balanced labeled subset of ceil(p * n) per class.

    Every train clip stays in the unlabeled pool; eval is untouched.
    """
    if not 0.0 < labeled_fraction <= 1.0:
        raise ValueError(f"labeled fraction must lie in (0, 1], got {labeled_fraction}")
    chosen: set[int] = set()
    for label in range(len(CLASSES)):
        ids = [r.clip_id for r in manifest.records if r.split == "train" and r.label == label]
        if not ids:
            continue
        n_labeled = int(np.ceil(labeled_fraction * len(ids)))
        rng = rng_from(seed, "split", label)
        chosen.update(rng.permutation(ids)[:n_labeled].tolist())
    records = tuple(
        dataclasses.replace(r, labeled=(r.clip_id in chosen)) if r.split == "train" else r
        for r in manifest.records
    )
    return DatasetManifest(seed=manifest.seed, spec=manifest.spec, records=records)


def extract_views(dataset: Dataset, flow_params: FlowParams = FlowParams()) -> Dataset:
    """Precompute flow/tg views for every clip, merged in id order."""
    views: dict[int, dict[str, np.ndarray]] = {}
    for clip_id in sorted(dataset.clips):
        vs = build_viewset(dataset.clip(clip_id), flow_params)
        views[clip_id] = {"flow": vs.flow_view.frames, "tg": vs.tg_view.frames}
    return Dataset(manifest=dataset.manifest, clips=dataset.clips, views=views)


# ---------------------------------------------------------------------------
# container IO


def write_container_file(path, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    """Write a MVPL container; single writer, whole file at once."""
    table = {}
    offset = 0
    blobs = []
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype=np.float64)
        blob = arr.tobytes(order="C")
        table[name] = {"offset": offset, "nbytes": len(blob), "shape": list(arr.shape)}
        blobs.append(blob)
        offset += len(blob)
    meta_block = json.dumps({"meta": meta, "arrays": table}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(meta_block)))
        fh.write(meta_block)
        for blob in blobs:
            fh.write(blob)


def read_container_file(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Read a MVPL container back; rejects bad magic/version/truncation."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 16:
        raise ContainerTruncatedError(f"{path}: file too short for header ({len(raw)} bytes)")
    if raw[:4] != MAGIC:
        raise ContainerMagicError(f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    (version,) = struct.unpack("<I", raw[4:8])
    if version != VERSION:
        raise ContainerVersionError(f"{path}: unknown version {version}, expected {VERSION}")
    (meta_len,) = struct.unpack("<Q", raw[8:16])
    if len(raw) < 16 + meta_len:
        raise ContainerTruncatedError(f"{path}: truncated meta block")
    block = json.loads(raw[16 : 16 + meta_len].decode("utf-8"))
    payload = raw[16 + meta_len :]
    arrays = {}
    for name, entry in block["arrays"].items():
        start, nbytes = entry["offset"], entry["nbytes"]
        if start + nbytes > len(payload):
            raise ContainerTruncatedError(
                f"{path}: array {name!r} extends past end of file "
                f"({start + nbytes} > {len(payload)} payload bytes)"
            )
        arr = np.frombuffer(payload[start : start + nbytes], dtype="<f8")
        arrays[name] = arr.reshape(entry["shape"]).copy()
    return block["meta"], arrays


def save_dataset(path, dataset: Dataset) -> None:
    arrays = {f"clip/{cid}": frames for cid, frames in dataset.clips.items()}
    for cid, named in dataset.views.items():
        for view_name, arr in named.items():
            arrays[f"view/{cid}/{view_name}"] = arr
    meta = {"kind": "dataset", "manifest": dataset.manifest.to_json_dict()}
    write_container_file(path, meta, arrays)


def load_dataset(path) -> Dataset:
    meta, arrays = read_container_file(path)
    if meta.get("kind") != "dataset":
        raise ContainerError(f"{path}: container kind {meta.get('kind')!r} is not 'dataset'")
    manifest = DatasetManifest.from_json_dict(meta["manifest"])
    clips: dict[int, np.ndarray] = {}
    views: dict[int, dict[str, np.ndarray]] = {}
    for name, arr in arrays.items():
        parts = name.split("/")
        if parts[0] == "clip":
            clips[int(parts[1])] = arr
        elif parts[0] == "view":
            views.setdefault(int(parts[1]), {})[parts[2]] = arr
    return Dataset(manifest=manifest, clips=clips, views=views)
