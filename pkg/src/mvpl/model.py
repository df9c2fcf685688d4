"""The single shared classifier: a tiny 3D CNN over [N,T,H,W,3] clips.

One model consumes any view (RGB, flow view, temporal-gradient view) with
no shape or code-path difference. Architecture: a few conv->BN->relu->
avg-pool blocks, global average pooling, dropout, linear classifier.
Inputs arrive in [0, 255] and are normalized to [-1, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensorlab as tl
from .seeding import rng_from
from .tensorlab import Tensor


@dataclass(frozen=True)
class ModelConfig:
    input_shape: tuple[int, int, int] = (8, 24, 24)  # (T, H, W); channels fixed at 3
    widths: tuple[int, ...] = (16, 32, 64)
    kernel: tuple[int, int, int] = (3, 3, 3)
    classes: int = 8
    dropout_rate: float = 0.5

    def __post_init__(self):
        if len(self.widths) < 1:
            raise ValueError("need at least one conv block")
        if any(k % 2 == 0 for k in self.kernel):
            raise ValueError("kernel extents must be odd for same-size convolution")
        if self.classes < 2:
            raise ValueError("need at least two classes")


@dataclass
class ModelState:
    config: ModelConfig
    params: dict[str, Tensor]
    running: dict[str, np.ndarray]
    step: int = 0

    def parameter_names(self) -> list[str]:
        return list(self.params)

    def decayed_parameter_names(self) -> list[str]:
        """Conv kernels and the classifier weight; BN affine and bias exempt."""
        return [n for n in self.params if n.endswith("/kernel") or n == "fc/weight"]

    def copy(self) -> "ModelState":
        return ModelState(
            config=self.config,
            params={k: Tensor(v.data.copy(), requires_grad=True) for k, v in self.params.items()},
            running={k: v.copy() for k, v in self.running.items()},
            step=self.step,
        )

    def state_bytes(self) -> bytes:
        """Canonical byte string of all parameters and running stats."""
        chunks = [self.params[k].data.tobytes() for k in sorted(self.params)]
        chunks += [self.running[k].tobytes() for k in sorted(self.running)]
        return b"".join(chunks)


def parameter_count(config: ModelConfig) -> int:
    kt, kh, kw = config.kernel
    cin = 3
    total = 0
    for width in config.widths:
        total += kt * kh * kw * cin * width  # conv kernel
        total += 2 * width  # bn gamma, beta
        cin = width
    total += config.widths[-1] * config.classes + config.classes  # fc
    return total


def init_parameters(config: ModelConfig, seed: int) -> ModelState:
    """He-style fan-in normal init for conv/linear; BN gamma=1, beta=0."""
    rng = rng_from(seed, "model-init")
    kt, kh, kw = config.kernel
    params: dict[str, Tensor] = {}
    running: dict[str, np.ndarray] = {}
    cin = 3
    for i, width in enumerate(config.widths):
        fan_in = kt * kh * kw * cin
        params[f"conv{i}/kernel"] = Tensor(
            rng.standard_normal((kt, kh, kw, cin, width)) * np.sqrt(2.0 / fan_in),
            requires_grad=True,
        )
        params[f"bn{i}/gamma"] = Tensor(np.ones(width), requires_grad=True)
        params[f"bn{i}/beta"] = Tensor(np.zeros(width), requires_grad=True)
        running[f"bn{i}/mean"] = np.zeros(width)
        running[f"bn{i}/var"] = np.ones(width)
        cin = width
    fan_in = config.widths[-1]
    params["fc/weight"] = Tensor(
        rng.standard_normal((fan_in, config.classes)) * np.sqrt(2.0 / fan_in),
        requires_grad=True,
    )
    params["fc/bias"] = Tensor(np.zeros(config.classes), requires_grad=True)
    return ModelState(config=config, params=params, running=running)


def _pool_window(shape: tuple[int, ...]) -> tuple[int, int, int]:
    return (min(2, shape[1]), min(2, shape[2]), min(2, shape[3]))


def forward(
    state: ModelState,
    clips: np.ndarray,
    mode: str,
    dropout_key: tuple = (),
) -> Tensor:
    """Logits for a batch of clips in [0, 255].

    Train mode uses batch statistics (updating running stats) and applies
    dropout keyed by `dropout_key`; eval mode reads running stats, skips
    dropout and leaves the state untouched.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode {mode!r}")
    cfg = state.config
    clips = np.asarray(clips, dtype=np.float64)
    expected = (cfg.input_shape[0], cfg.input_shape[1], cfg.input_shape[2], 3)
    if clips.ndim != 5 or clips.shape[1:] != expected:
        raise ValueError(f"clip batch shape {clips.shape} != (N,) + {expected}")
    x = Tensor(clips / 127.5 - 1.0)
    for i in range(len(cfg.widths)):
        x = tl.conv3d(x, state.params[f"conv{i}/kernel"], stride=1, padding="same")
        x = tl.batchnorm(
            x,
            state.params[f"bn{i}/gamma"],
            state.params[f"bn{i}/beta"],
            state.running[f"bn{i}/mean"],
            state.running[f"bn{i}/var"],
            mode=mode,
        )
        x = tl.relu(x)
        window = _pool_window(x.shape)
        if window != (1, 1, 1):
            x = tl.avgpool3d(x, window)
    x = tl.avgpool3d(x, (x.shape[1], x.shape[2], x.shape[3]))
    x = tl.reshape(x, (x.shape[0], cfg.widths[-1]))
    if mode == "train" and cfg.dropout_rate > 0.0:
        x = tl.dropout(x, cfg.dropout_rate, key=dropout_key + ("dropout0",), mode="train")
    return tl.linear(x, state.params["fc/weight"], state.params["fc/bias"])


def predict_distribution(state: ModelState, clips: np.ndarray) -> np.ndarray:
    """Eval-mode softmax rows; never recorded on a tape."""
    with tl.no_tape():
        logits = forward(state, clips, mode="eval")
    return tl.softmax(logits.data)


def save_checkpoint(path, state: ModelState) -> None:
    """Persist config + parameters + running stats + step in container format."""
    from .data import write_container_file

    import dataclasses

    arrays = {f"param/{k}": v.data for k, v in state.params.items()}
    arrays.update({f"running/{k}": v for k, v in state.running.items()})
    meta = {
        "kind": "checkpoint",
        "config": dataclasses.asdict(state.config),
        "step": state.step,
    }
    write_container_file(path, meta, arrays)


def load_checkpoint(path) -> ModelState:
    from .data import ContainerError, read_container_file

    meta, arrays = read_container_file(path)
    if meta.get("kind") != "checkpoint":
        raise ContainerError(f"{path}: container kind {meta.get('kind')!r} is not 'checkpoint'")
    cfg_d = dict(meta["config"])
    for key in ("input_shape", "widths", "kernel"):
        cfg_d[key] = tuple(cfg_d[key])
    config = ModelConfig(**cfg_d)
    params = {}
    running = {}
    for name, arr in arrays.items():
        group, key = name.split("/", 1)
        if group == "param":
            params[key] = Tensor(arr, requires_grad=True)
        elif group == "running":
            running[key] = arr
    state = ModelState(config=config, params=params, running=running, step=int(meta["step"]))
    if set(params) != set(init_parameters(config, 0).params):
        raise ContainerError(f"{path}: checkpoint parameters do not match its config")
    return state


def gradient_suite(eps: float = 1e-5, tol: float = 1e-4) -> list[tl.GradCheckReport]:
    """End-to-end finite-difference check of the loss w.r.t. every parameter."""
    cfg = ModelConfig(input_shape=(4, 4, 4), widths=(2, 3), classes=3, dropout_rate=0.5)
    state = init_parameters(cfg, seed=17)
    rng = rng_from(17, "model-grad-suite")
    clips = rng.uniform(0.0, 255.0, size=(2, 4, 4, 4, 3))
    labels = np.array([0, 2])
    pristine = {k: v.copy() for k, v in state.running.items()}

    names = list(state.params)

    def loss_fn(*tensors: Tensor) -> Tensor:
        for name, t in zip(names, tensors):
            state.params[name] = t
        for k, v in pristine.items():
            state.running[k][...] = v
        logits = forward(state, clips, mode="train", dropout_key=(17, 0))
        return tl.softmax_cross_entropy(logits, labels)

    report = tl.grad_check(
        loss_fn, [state.params[n] for n in names], eps, tol, name="model/end-to-end"
    )
    return [report]
