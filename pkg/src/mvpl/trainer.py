"""The semi-supervised training loop.

Each batch holds batch_size labeled clips plus mu * batch_size unlabeled
ones drawn from the whole training set with labels stripped. The
supervised loss averages cross entropy over every enabled view of every
labeled clip. The unsupervised loss predicts on weakly augmented views
(eval mode, no gradients), turns the predictions into pseudo-labels via
the configured strategy, and supervises the learner branch of each view,
gated by the confidence mask. Total loss: sup + lambda_u * unsup.
Updates are plain SGD with momentum and decoupled L2 on conv/linear
weights, under a linear-ramp + half-period-cosine learning rate.

Epochs count labeled data only; the first `warmup_epochs` epochs skip the
unlabeled pool entirely, so the state after warm-up is a pure function of
the labeled subset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensorlab as tl
from .augment import AugmentationPolicy, center_crops, strong_augment, weak_augment
from .model import ModelConfig, ModelState, forward, init_parameters, predict_distribution
from .seeding import rng_from
from .ssl_core import InstantiationConfig, StrategyConfig, generate_pseudolabels, unlabeled_targets
from .tensorlab import Tape, Tensor
from .views import VideoClip, ViewSet

VIEW_ORDER = ("rgb", "flow", "tg")


@dataclass(frozen=True)
class TrainConfig:
    mu: int = 3  # unlabeled/labeled ratio per batch
    tau: float = 0.3  # confidence threshold
    lambda_u: float = 1.0  # unlabeled loss weight
    strategy: StrategyConfig = StrategyConfig("aggregated")
    method: str = "fixmatch"  # pseudo_label | uda | fixmatch
    sharpen_temperature: float = 0.5
    masked: bool = True
    epochs: int = 60
    warmup_epochs: int = 0  # labeled-only curriculum
    lr_base: float = 0.8
    lr_ramp_epochs: float = 34.0
    momentum: float = 0.9
    weight_decay: float = 1e-4
    batch_size: int = 8  # labeled clips per batch
    seed: int = 0
    views_enabled: tuple[str, ...] = ("rgb", "flow", "tg")
    crop_size: int = 24
    scale_range: tuple[float, float] = (256 / 224, 320 / 224)
    eval_clips: int = 2  # temporal clips per video at evaluation
    eval_crops: int = 1  # spatial crops per clip at evaluation
    eval_every: int = 1

    def __post_init__(self):
        if self.mu < 0 or int(self.mu) != self.mu:
            raise ValueError(f"mu must be a non-negative integer, got {self.mu}")
        if self.lambda_u < 0:
            raise ValueError(f"lambda_u must be >= 0, got {self.lambda_u}")
        if not 0 <= self.warmup_epochs < self.epochs:
            raise ValueError(
                f"warmup epochs must satisfy 0 <= W < epochs, got W={self.warmup_epochs}"
            )
        if not self.views_enabled or "rgb" not in self.views_enabled:
            raise ValueError(f"views_enabled must contain 'rgb', got {self.views_enabled}")
        unknown = set(self.views_enabled) - set(VIEW_ORDER)
        if unknown:
            raise ValueError(f"unknown views {sorted(unknown)}; expected subset of {VIEW_ORDER}")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 (batch statistics)")
        # fail fast on inconsistent SSL settings
        self.instantiation  # noqa: B018

    @property
    def instantiation(self) -> InstantiationConfig:
        return InstantiationConfig(
            method=self.method,
            tau=self.tau,
            sharpen_temperature=self.sharpen_temperature,
            masked=self.masked,
        )

    @property
    def weak_policy(self) -> AugmentationPolicy:
        return AugmentationPolicy(
            kind="weak",
            seed=_policy_seed(self.seed, "weak"),
            crop_size=self.crop_size,
            scale_range=self.scale_range,
        )

    @property
    def strong_policy(self) -> AugmentationPolicy:
        return AugmentationPolicy(
            kind="strong",
            seed=_policy_seed(self.seed, "strong"),
            crop_size=self.crop_size,
            scale_range=self.scale_range,
        )

    @property
    def prediction_policy(self) -> AugmentationPolicy:
        """Weak family used for the pseudo-label prediction branch."""
        return AugmentationPolicy(
            kind="weak",
            seed=_policy_seed(self.seed, "predict"),
            crop_size=self.crop_size,
            scale_range=self.scale_range,
        )

    def learner_policy(self) -> AugmentationPolicy:
        """The branch trained on pseudo-labels.

        pseudo_label reuses the prediction branch's family and seed, so
        the learner sees the same weakly-augmented clip it was labeled
        on; fixmatch/uda train on the strong family.
        """
        if self.instantiation.learner_family == "weak":
            return self.prediction_policy
        return self.strong_policy


def _policy_seed(seed: int, tag: str) -> int:
    return int(rng_from(seed, "policy", tag).integers(0, 2**63 - 1))


@dataclass
class LossReport:
    loss_sup: float
    loss_unsup: float
    lambda_u: float
    mask_rate: float | None
    pl_accuracy: dict[str, float] | None

    @property
    def loss_total(self) -> float:
        return self.loss_sup + self.lambda_u * self.loss_unsup


@dataclass
class TrainData:
    """Materialized views and labels for one training run."""

    labeled: list[tuple[ViewSet, int]]
    unlabeled: list[ViewSet]
    unlabeled_gt: list[int]  # diagnostics only; never used as supervision
    eval_clips: list[VideoClip]
    eval_labels: list[int]


def prepare_training_data(dataset, flow_params=None) -> TrainData:
    """Build ViewSets for the labeled subset, the full unlabeled pool, and eval."""
    from .views import FlowParams

    fp = flow_params or FlowParams()
    manifest = dataset.manifest
    labeled = [
        (dataset.viewset(i, fp), manifest.record(i).label) for i in manifest.labeled_train_ids()
    ]
    unlabeled = [dataset.viewset(i, fp) for i in manifest.train_ids()]
    unlabeled_gt = [manifest.record(i).label for i in manifest.train_ids()]
    eval_clips = [dataset.clip(i) for i in manifest.eval_ids()]
    eval_labels = [manifest.record(i).label for i in manifest.eval_ids()]
    return TrainData(labeled, unlabeled, unlabeled_gt, eval_clips, eval_labels)


# ---------------------------------------------------------------------------
# losses


def supervised_loss(
    state: ModelState,
    viewsets: list[ViewSet],
    labels: np.ndarray,
    config: TrainConfig,
    step: int,
) -> Tensor:
    """Mean cross entropy over every enabled view of every labeled clip."""
    if len(viewsets) == 0:
        raise ValueError("supervised batch must be nonempty")
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= state.config.classes:
        raise ValueError(f"label out of range [0, {state.config.classes})")
    n = len(viewsets)
    m = len(config.views_enabled)
    policy = config.weak_policy
    total: Tensor | None = None
    for view_name in config.views_enabled:
        batch = np.stack(
            [
                weak_augment(vs.view(view_name), policy, clip_id=vs.clip_id, step=step).frames
                for vs in viewsets
            ]
        )
        logits = forward(
            state, batch, mode="train", dropout_key=(config.seed, step, "sup", view_name)
        )
        part = tl.softmax_cross_entropy(logits, labels, normalizer=float(n * m))
        total = part if total is None else tl.add(total, part)
    return total


@dataclass
class UnsupStats:
    value: float
    mask_rate: float
    included: int
    total: int
    pl_accuracy: dict[str, float]


def unsupervised_loss(
    state: ModelState,
    viewsets: list[ViewSet],
    config: TrainConfig,
    step: int,
    gt_labels: list[int] | None = None,
) -> tuple[Tensor, UnsupStats]:
    """Pseudo-label loss over a batch of unlabeled ViewSets.

    Weak-augments every view for an eval-mode prediction pass (never on
    the tape), builds per-clip pseudo-labels with the configured
    strategy, then scores the learner branch of each view against its
    target, masked by confidence and normalized by batch * views.
    """
    n = len(viewsets)
    if config.mu > 0 and n != config.mu * config.batch_size:
        raise ValueError(
            f"unlabeled batch holds {n} clips, expected mu*N_l = "
            f"{config.mu * config.batch_size}"
        )
    m = len(config.views_enabled)
    classes = state.config.classes
    pred_policy = config.prediction_policy
    inst = config.instantiation

    probs = np.empty((n, m, classes))
    for vi, view_name in enumerate(config.views_enabled):
        wbatch = np.stack(
            [
                weak_augment(vs.view(view_name), pred_policy, clip_id=vs.clip_id, step=step).frames
                for vs in viewsets
            ]
        )
        probs[:, vi] = predict_distribution(state, wbatch)

    per_clip_targets = []
    for i in range(n):
        outcome = generate_pseudolabels(probs[i], config.strategy, config.tau, key=(step, i))
        per_clip_targets.append((outcome, unlabeled_targets(outcome, inst)))

    learner_policy = config.learner_policy()
    apply_fn = weak_augment if learner_policy.kind == "weak" else strong_augment
    total: Tensor | None = None
    included = 0
    pl_hits: dict[str, list[float]] = {name: [] for name in config.views_enabled}
    for vi, view_name in enumerate(config.views_enabled):
        weights = np.array(
            [1.0 if per_clip_targets[i][1][vi].include else 0.0 for i in range(n)]
        )
        included += int(weights.sum())
        if gt_labels is not None:
            pl_hits[view_name] = [
                float(per_clip_targets[i][0].hard_labels[vi] == gt_labels[i]) for i in range(n)
            ]
        if not weights.any():
            continue  # every clip masked out: the view contributes exactly 0
        batch = np.stack(
            [
                apply_fn(vs.view(view_name), learner_policy, clip_id=vs.clip_id, step=step).frames
                for vs in viewsets
            ]
        )
        if inst.method == "uda":
            targets = np.stack(
                [np.asarray(per_clip_targets[i][1][vi].target) for i in range(n)]
            )
            targets = targets / targets.sum(axis=1, keepdims=True)
        else:
            targets = np.array([per_clip_targets[i][1][vi].target for i in range(n)])
        logits = forward(
            state, batch, mode="train", dropout_key=(config.seed, step, "unsup", view_name)
        )
        part = tl.softmax_cross_entropy(
            logits, targets, weights=weights, normalizer=float(n * m)
        )
        total = part if total is None else tl.add(total, part)

    if total is None:
        total = Tensor(np.zeros(()))
    stats = UnsupStats(
        value=float(total.data),
        mask_rate=included / float(n * m),
        included=included,
        total=n * m,
        pl_accuracy={k: float(np.mean(v)) if v else float("nan") for k, v in pl_hits.items()},
    )
    return total, stats


# ---------------------------------------------------------------------------
# schedule and updates


def lr_at(iteration: int, total_iterations: int, config: TrainConfig) -> float:
    """Linear ramp for the first ramp window, then half-period cosine.

    Post-ramp: lr = eta * 0.5 * (cos(n / n_max * pi) + 1).
    """
    if not 0 <= iteration <= total_iterations:
        raise ValueError(f"iteration {iteration} outside [0, {total_iterations}]")
    ramp_frac = min(config.lr_ramp_epochs / config.epochs, 1.0)
    n_ramp = ramp_frac * total_iterations
    if n_ramp > 0 and iteration < n_ramp:
        return config.lr_base * (iteration + 1) / n_ramp
    return config.lr_base * 0.5 * (np.cos(iteration / total_iterations * np.pi) + 1.0)


def sgd_step(
    state: ModelState,
    grads: dict[str, np.ndarray],
    velocity: dict[str, np.ndarray],
    lr: float,
    config: TrainConfig,
) -> None:
    """Momentum SGD with decoupled L2 on conv/linear weights only."""
    decayed = set(state.decayed_parameter_names())
    for name, param in state.params.items():
        g = grads[name]
        v = velocity[name]
        v *= config.momentum
        v += g
        update = lr * v
        if name in decayed:
            update = update + lr * config.weight_decay * param.data
        param.data = param.data - update


# ---------------------------------------------------------------------------
# epoch loop


def _unlabeled_indices(config: TrainConfig, epoch: int, pool_size: int, needed: int) -> np.ndarray:
    """Deterministic unlabeled sample stream, reshuffled on exhaustion."""
    out: list[np.ndarray] = []
    chunk = 0
    have = 0
    while have < needed:
        perm = rng_from(config.seed, "unlabeled-order", epoch, chunk).permutation(pool_size)
        out.append(perm)
        have += pool_size
        chunk += 1
    return np.concatenate(out)[:needed]


def train_epoch(
    state: ModelState,
    data: TrainData,
    config: TrainConfig,
    epoch: int,
    velocity: dict[str, np.ndarray],
    total_iterations: int,
) -> list[LossReport]:
    """One pass over the labeled set; mutates state and velocity in place."""
    if not data.labeled:
        raise ValueError("labeled set is empty")
    n_l = config.batch_size
    n_batches = len(data.labeled) // n_l
    if n_batches == 0:
        raise ValueError(
            f"batch_size {n_l} exceeds labeled set size {len(data.labeled)}"
        )
    order = rng_from(config.seed, "labeled-order", epoch).permutation(len(data.labeled))
    warm = epoch < config.warmup_epochs
    use_unlabeled = (not warm) and config.mu > 0 and len(data.unlabeled) > 0
    if use_unlabeled:
        uidx = _unlabeled_indices(
            config, epoch, len(data.unlabeled), n_batches * config.mu * n_l
        )
    reports = []
    names = list(state.params)
    for b in range(n_batches):
        step = epoch * n_batches + b
        lr = lr_at(step, total_iterations, config)
        lab = [data.labeled[i] for i in order[b * n_l : (b + 1) * n_l]]
        lab_sets = [vs for vs, _ in lab]
        lab_labels = np.array([y for _, y in lab])
        with Tape() as tape:
            sup = supervised_loss(state, lab_sets, lab_labels, config, step)
            if use_unlabeled:
                sel = uidx[b * config.mu * n_l : (b + 1) * config.mu * n_l]
                unsup, stats = unsupervised_loss(
                    state,
                    [data.unlabeled[i] for i in sel],
                    config,
                    step,
                    gt_labels=[data.unlabeled_gt[i] for i in sel],
                )
                total = tl.add(sup, tl.scale(unsup, config.lambda_u))
            else:
                unsup, stats = None, None
                total = sup
            grad_list = tape.gradients(total, [state.params[n] for n in names])
        grads = dict(zip(names, grad_list))
        sgd_step(state, grads, velocity, lr, config)
        state.step += 1
        reports.append(
            LossReport(
                loss_sup=float(sup.data),
                loss_unsup=float(unsup.data) if unsup is not None else 0.0,
                lambda_u=config.lambda_u,
                mask_rate=stats.mask_rate if stats is not None else None,
                pl_accuracy=stats.pl_accuracy if stats is not None else None,
            )
        )
    return reports


# ---------------------------------------------------------------------------
# evaluation


def evaluate(
    state: ModelState,
    clips: list[VideoClip],
    labels: list[int],
    clips_per_video: int = 2,
    crops: int = 1,
    predict=None,
) -> float:
    """Top-1 accuracy, RGB only: k uniform temporal clips x c spatial crops
    per video, softmax scores averaged, ties broken toward the low index."""
    if len(clips) != len(labels) or not clips:
        raise ValueError("need one label per eval clip")
    predict = predict or (lambda batch: predict_distribution(state, batch))
    t_model = state.config.input_shape[0]
    crop = state.config.input_shape[1]
    correct = 0
    for clip, label in zip(clips, labels):
        t_video = clip.shape[0]
        if t_video < t_model:
            raise ValueError(f"eval video has {t_video} frames < model {t_model}")
        offsets = np.round(np.linspace(0, t_video - t_model, clips_per_video)).astype(int)
        subclips = []
        for off in offsets:
            window = clip.frames[off : off + t_model]
            subclips.extend(center_crops(window, crop, crops))
        scores = predict(np.stack(subclips))
        mean_scores = scores.mean(axis=0)
        if int(np.argmax(mean_scores)) == label:
            correct += 1
    return correct / len(clips)


# ---------------------------------------------------------------------------
# full run


METRIC_COLUMNS = (
    "epoch",
    "lr",
    "loss_sup",
    "loss_unsup",
    "mask_rate",
    "pl_acc_rgb",
    "pl_acc_flow",
    "pl_acc_tg",
    "eval_top1",
)


@dataclass
class TrainResult:
    state: ModelState
    rows: list[dict]
    final_top1: float

    def metrics_csv(self) -> str:
        lines = [",".join(METRIC_COLUMNS)]
        for row in self.rows:
            lines.append(",".join(str(row.get(col, "")) for col in METRIC_COLUMNS))
        return "\n".join(lines) + "\n"


def run_training(
    dataset,
    config: TrainConfig,
    model_config: ModelConfig | None = None,
    data: TrainData | None = None,
) -> TrainResult:
    """Train from scratch on a dataset; returns state plus per-epoch metrics."""
    data = data or prepare_training_data(dataset)
    spec = dataset.manifest.spec
    if model_config is None:
        model_config = ModelConfig(
            input_shape=(spec.frames, config.crop_size, config.crop_size)
        )
    state = init_parameters(model_config, config.seed)
    velocity = {k: np.zeros_like(v.data) for k, v in state.params.items()}
    n_batches = len(data.labeled) // config.batch_size
    if n_batches == 0:
        raise ValueError(
            f"batch_size {config.batch_size} exceeds labeled set size {len(data.labeled)}"
        )
    total_iterations = config.epochs * n_batches
    rows = []
    top1 = float("nan")
    for epoch in range(config.epochs):
        reports = train_epoch(state, data, config, epoch, velocity, total_iterations)
        row: dict = {
            "epoch": epoch,
            "lr": repr(lr_at(epoch * n_batches, total_iterations, config)),
            "loss_sup": repr(float(np.mean([r.loss_sup for r in reports]))),
            "loss_unsup": repr(float(np.mean([r.loss_unsup for r in reports]))),
        }
        rates = [r.mask_rate for r in reports if r.mask_rate is not None]
        row["mask_rate"] = repr(float(np.mean(rates))) if rates else ""
        for view in VIEW_ORDER:
            accs = [
                r.pl_accuracy[view]
                for r in reports
                if r.pl_accuracy is not None and view in r.pl_accuracy
            ]
            accs = [a for a in accs if not np.isnan(a)]
            row[f"pl_acc_{view}"] = repr(float(np.mean(accs))) if accs else ""
        last = epoch == config.epochs - 1
        if data.eval_clips and (last or (epoch + 1) % config.eval_every == 0):
            top1 = evaluate(
                state,
                data.eval_clips,
                data.eval_labels,
                clips_per_video=config.eval_clips,
                crops=config.eval_crops,
            )
            row["eval_top1"] = repr(top1)
        else:
            row["eval_top1"] = ""
        rows.append(row)
    return TrainResult(state=state, rows=rows, final_top1=top1)
