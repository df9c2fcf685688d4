"""Pseudo-label generation across views and the learning-target rules.

Four strategies turn per-view class distributions into pseudo-label
distributions: self (each view supervises itself), random (a uniformly
drawn other view), cross (a fixed derangement of views), and aggregated
(weighted mean over all views, or over all but the view itself). Three
method instantiations consume the outcome: pseudo_label and fixmatch
train toward the hard label, uda toward a sharpened soft distribution.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .seeding import rng_from

STRATEGIES = ("self", "random", "cross", "aggregated")
METHODS = ("pseudo_label", "uda", "fixmatch")


def derangements(m: int) -> list[tuple[int, ...]]:
    """All permutations of range(m) with no fixed point."""
    return [p for p in itertools.permutations(range(m)) if all(p[i] != i for i in range(m))]


@dataclass(frozen=True)
class StrategyConfig:
    strategy: str
    bijection: tuple[int, ...] | None = None  # cross only; 0-based view indices
    weights: tuple[float, ...] | None = None  # aggregated only
    exclusion: bool = False  # aggregated only
    seed: int = 0  # random only

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected {STRATEGIES}")
        if self.strategy == "cross":
            if self.bijection is None:
                raise ValueError("cross strategy needs a bijection")
            b = self.bijection
            if sorted(b) != list(range(len(b))):
                raise ValueError(f"bijection {b} is not a permutation")
            if any(b[i] == i for i in range(len(b))):
                raise ValueError(f"bijection {b} must be a derangement (no view maps to itself)")
        if self.strategy == "aggregated" and self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if (w < 0).any() or w.sum() <= 0:
                raise ValueError(f"aggregated weights must be >= 0 with positive sum, got {w}")


@dataclass(frozen=True)
class PseudoLabelOutcome:
    """Per view: target distribution, hard label, confidence mask."""

    distributions: np.ndarray  # [M, C]
    hard_labels: np.ndarray  # [M] ints
    mask: np.ndarray  # [M] bools, max(s_m) >= tau


@dataclass(frozen=True)
class InstantiationConfig:
    method: str
    tau: float = 0.3
    sharpen_temperature: float = 0.5  # uda only
    masked: bool = True  # apply the confidence threshold

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected {METHODS}")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")
        if not 0.0 < self.sharpen_temperature <= 1.0:
            raise ValueError(
                f"sharpen temperature must lie in (0, 1], got {self.sharpen_temperature}"
            )

    @property
    def learner_family(self) -> str:
        """Which augmentation family supervises the learner branch."""
        return "weak" if self.method == "pseudo_label" else "strong"


def _validate_rows(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 2:
        raise ValueError(f"predictions must be [M, C], got shape {q.shape}")
    if (q < 0).any() or np.abs(q.sum(axis=1) - 1.0).max() > 1e-6:
        raise ValueError("prediction rows must be non-negative and sum to 1")
    return q


def generate_pseudolabels(
    q: np.ndarray,
    strategy: StrategyConfig,
    tau: float,
    key: tuple = (),
) -> PseudoLabelOutcome:
    """Pseudo-label distributions from per-view predictions q [M, C].

    `key` feeds the random strategy's draw (e.g. (step, clip_index)) so
    training runs reproduce. Hard labels break argmax ties toward the
    lowest class index.
    """
    q = _validate_rows(q)
    m = q.shape[0]
    kind = strategy.strategy
    if kind == "self":
        s = q.copy()
    elif kind == "random":
        if m < 2:
            raise ValueError("random strategy needs at least 2 views")
        rng = rng_from(strategy.seed, *key, "random-supervision")
        picks = [(v + 1 + int(rng.integers(0, m - 1))) % m for v in range(m)]
        s = q[picks]
    elif kind == "cross":
        b = strategy.bijection
        if b is None or len(b) != m:
            raise ValueError(f"bijection {b} does not cover {m} views")
        s = q[list(b)]
    else:  # aggregated
        w = np.ones(m) if strategy.weights is None else np.asarray(strategy.weights, dtype=float)
        if w.shape != (m,):
            raise ValueError(f"weights shape {w.shape} != ({m},)")
        if strategy.exclusion:
            if m < 2:
                raise ValueError("exclusion aggregation needs at least 2 views")
            s = np.empty_like(q)
            for v in range(m):
                keep = np.arange(m) != v
                denom = w[keep].sum()
                if denom <= 0:
                    raise ValueError(f"weights excluding view {v} sum to 0")
                s[v] = (w[keep, None] * q[keep]).sum(axis=0) / denom
        else:
            pooled = (w[:, None] * q).sum(axis=0) / w.sum()
            s = np.tile(pooled, (m, 1))
    hard = s.argmax(axis=1)
    mask = s.max(axis=1) >= tau
    return PseudoLabelOutcome(distributions=s, hard_labels=hard, mask=mask)


def sharpen(p: np.ndarray, temperature: float) -> np.ndarray:
    """p_c^(1/T) / sum_k p_k^(1/T); T=1 is the identity."""
    if temperature <= 0.0:
        raise ValueError("sharpen temperature must be positive; use the hard-label path for T=0")
    if temperature > 1.0:
        raise ValueError(f"sharpen temperature must lie in (0, 1], got {temperature}")
    p = np.asarray(p, dtype=np.float64)
    if (p < 0).any() or abs(p.sum() - 1.0) > 1e-6:
        raise ValueError("distribution must be non-negative and sum to 1")
    if temperature == 1.0:
        return p.copy()
    powered = p ** (1.0 / temperature)
    return powered / powered.sum()


@dataclass(frozen=True)
class ViewTarget:
    target: int | np.ndarray  # class index (hard) or distribution row (soft)
    include: bool
    kind: str  # "hard" | "soft"


def unlabeled_targets(
    outcome: PseudoLabelOutcome, inst: InstantiationConfig
) -> list[ViewTarget]:
    """Per-view training targets under one method instantiation.

    pseudo_label / fixmatch: the hard label, included iff the confidence
    mask passes. uda: the sharpened distribution (mask evaluated on the
    pre-sharpening one). With masked=False every view is included.
    """
    targets = []
    for v in range(outcome.distributions.shape[0]):
        include = bool(outcome.mask[v]) if inst.masked else True
        if inst.method == "uda":
            soft = sharpen(outcome.distributions[v], inst.sharpen_temperature)
            targets.append(ViewTarget(target=soft, include=include, kind="soft"))
        else:
            targets.append(
                ViewTarget(target=int(outcome.hard_labels[v]), include=include, kind="hard")
            )
    return targets
