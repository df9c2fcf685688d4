"""Dense float64 tensors with a reverse-mode gradient tape.

Deliberately small: just enough differentiable operations for a tiny 3D
CNN and the two cross-entropy losses. Everything is float64 so central
finite differences at eps=1e-5 check tape gradients to < 1e-4 relative
error. Speed is a non-goal; determinism is a hard requirement.

A `Tape` is a context manager. Ops executed while a tape is active append
one node each; `Tape.gradients` walks the nodes in strict reverse append
order exactly once. With no active tape, ops run forward-only.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .seeding import rng_from


class Tensor:
    """N-dimensional float64 array, optionally tracked on the active tape."""

    __slots__ = ("data", "requires_grad", "tape", "node")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor values must be finite")
        self.data = arr
        self.requires_grad = requires_grad
        self.tape: Optional[Tape] = None
        self.node: Optional[int] = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


@dataclass
class _Node:
    op: str
    inputs: tuple[int, ...]
    # maps the output gradient to one gradient (or None) per input
    backward: Optional[Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]]


class Tape:
    """Ordered record of operations; single-threaded by contract."""

    _active: Optional["Tape"] = None

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "Tape":
        if Tape._active is not None:
            raise RuntimeError("another tape is already active")
        Tape._active = self
        return self

    def __exit__(self, *exc) -> None:
        Tape._active = None

    @staticmethod
    def active() -> Optional["Tape"]:
        return Tape._active

    def _ensure_leaf(self, t: Tensor) -> int:
        if t.tape is not self:
            t.tape = self
            t.node = len(self.nodes)
            self.nodes.append(_Node("leaf", (), None))
        assert t.node is not None
        return t.node

    def record(
        self,
        out: Tensor,
        inputs: Sequence[Tensor],
        backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]],
        op: str,
    ) -> None:
        """Append one node. Exposed so callers can define custom ops."""
        ids = tuple(self._ensure_leaf(t) for t in inputs)
        out.tape = self
        out.node = len(self.nodes)
        self.nodes.append(_Node(op, ids, backward))

    def gradients(self, loss: Tensor, wrt: Sequence[Tensor]) -> list[np.ndarray]:
        """Gradient of a scalar loss w.r.t. each tensor in `wrt`.

        Visits nodes in strict reverse append order exactly once;
        tensors never touched by the loss get zero gradients.
        """
        if loss.tape is not self or loss.node is None:
            raise ValueError("loss is not recorded on this tape")
        if loss.data.shape != ():
            raise ValueError(f"loss must be scalar, got shape {loss.data.shape}")
        grads: list[Optional[np.ndarray]] = [None] * len(self.nodes)
        grads[loss.node] = np.ones((), dtype=np.float64)
        for nid in range(len(self.nodes) - 1, -1, -1):
            g = grads[nid]
            node = self.nodes[nid]
            if g is None or node.backward is None:
                continue
            for pid, pg in zip(node.inputs, node.backward(g)):
                if pg is None:
                    continue
                if grads[pid] is None:
                    grads[pid] = pg.copy() if pg.base is not None else pg
                else:
                    grads[pid] = grads[pid] + pg
        out = []
        for t in wrt:
            if t.tape is self and t.node is not None and grads[t.node] is not None:
                out.append(np.asarray(grads[t.node], dtype=np.float64))
            else:
                out.append(np.zeros_like(t.data))
        return out


@contextmanager
def no_tape():
    """Run ops without recording, e.g. a prediction pass inside a taped loss."""
    saved = Tape._active
    Tape._active = None
    try:
        yield
    finally:
        Tape._active = saved


def _track(
    data: np.ndarray,
    inputs: Sequence[Tensor],
    backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]],
    op: str,
) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = any(t.requires_grad for t in inputs)
    out.tape = None
    out.node = None
    tape = Tape.active()
    if tape is not None:
        tape.record(out, inputs, backward, op)
    return out


def _as_triple(v) -> tuple[int, int, int]:
    if isinstance(v, int):
        return (v, v, v)
    t = tuple(int(x) for x in v)
    if len(t) != 3:
        raise ValueError(f"expected int or length-3 tuple, got {v!r}")
    return t


# ---------------------------------------------------------------------------
# elementwise / shape ops


def add(a: Tensor, b: Tensor) -> Tensor:
    """a + b; b may be a trailing-shape broadcast (e.g. a bias row)."""
    if a.data.shape != b.data.shape:
        if a.data.shape[-b.data.ndim:] != b.data.shape:
            raise ValueError(f"add shapes incompatible: {a.data.shape} vs {b.data.shape}")
    lead = a.data.ndim - b.data.ndim

    def backward(g):
        gb = g.sum(axis=tuple(range(lead))) if lead else g
        return g, gb

    return _track(a.data + b.data, (a, b), backward, "add")


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)
    return _track(x.data * c, (x,), lambda g: (g * c,), "scale")


def reshape(x: Tensor, shape) -> Tensor:
    orig = x.data.shape
    return _track(x.data.reshape(shape), (x,), lambda g: (g.reshape(orig),), "reshape")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0  # subgradient at exactly 0 is 0
    return _track(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,), "relu")


def weighted_sum(x: Tensor, w: np.ndarray) -> Tensor:
    """Scalar dot product with a constant array; the grad_check projector."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != x.data.shape:
        raise ValueError(f"weight shape {w.shape} != tensor shape {x.data.shape}")
    return _track(np.asarray((x.data * w).sum()), (x,), lambda g: (g * w,), "weighted_sum")


def dropout(x: Tensor, rate: float, key: tuple, mode: str) -> Tensor:
    """Inverted dropout with a counter-based RNG.

    The mask is a pure function of `key` (global seed, step, layer id, ...),
    so runs reproduce regardless of evaluation order.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "eval" or rate == 0.0:
        return _track(x.data, (x,), lambda g: (g,), "dropout_eval")
    keep = rng_from(*key).random(x.data.shape) >= rate
    m = keep / (1.0 - rate)
    return _track(x.data * m, (x,), lambda g: (g * m,), "dropout")


# ---------------------------------------------------------------------------
# linear / convolution


def linear(x: Tensor, w: Tensor, b: Optional[Tensor] = None) -> Tensor:
    if x.data.ndim != 2 or w.data.ndim != 2 or x.data.shape[1] != w.data.shape[0]:
        raise ValueError(f"linear shapes incompatible: x{x.data.shape} @ w{w.data.shape}")
    y = x.data @ w.data
    if b is None:
        def backward(g):
            return g @ w.data.T, x.data.T @ g
        return _track(y, (x, w), backward, "linear")
    if b.data.shape != (w.data.shape[1],):
        raise ValueError(f"bias shape {b.data.shape} != ({w.data.shape[1]},)")

    def backward_b(g):
        return g @ w.data.T, x.data.T @ g, g.sum(axis=0)

    return _track(y + b.data, (x, w, b), backward_b, "linear")


def conv3d(x: Tensor, k: Tensor, stride=1, padding=0) -> Tensor:
    """Cross-correlation of [N,T,H,W,Cin] with [kT,kH,kW,Cin,Cout].

    `padding` is an int, a length-3 tuple, or "same" (odd kernels only).
    Implemented as im2col + one GEMM; differentiable w.r.t. both inputs.
    """
    if x.data.ndim != 5:
        raise ValueError(f"conv3d input must be rank 5 [N,T,H,W,Cin], got {x.data.shape}")
    if k.data.ndim != 5:
        raise ValueError(f"conv3d kernel must be rank 5 [kT,kH,kW,Cin,Cout], got {k.data.shape}")
    kt, kh, kw, cin, cout = k.data.shape
    if x.data.shape[4] != cin:
        raise ValueError(
            f"conv3d channel mismatch: input {x.data.shape} has Cin={x.data.shape[4]}, "
            f"kernel {k.data.shape} expects Cin={cin}"
        )
    st, sh, sw = _as_triple(stride)
    if padding == "same":
        if kt % 2 == 0 or kh % 2 == 0 or kw % 2 == 0:
            raise ValueError("'same' padding requires odd kernel extents")
        pt, ph, pw = (kt - 1) // 2, (kh - 1) // 2, (kw - 1) // 2
    else:
        pt, ph, pw = _as_triple(padding)
    n, t, h, w, _ = x.data.shape
    tp, hp, wp = t + 2 * pt, h + 2 * ph, w + 2 * pw
    if tp < kt or hp < kh or wp < kw:
        raise ValueError(
            f"conv3d input too small: padded extents ({tp},{hp},{wp}) "
            f"< kernel extents ({kt},{kh},{kw})"
        )
    to, ho, wo = (tp - kt) // st + 1, (hp - kh) // sh + 1, (wp - kw) // sw + 1

    xp = x.data
    if pt or ph or pw:
        xp = np.pad(x.data, ((0, 0), (pt, pt), (ph, ph), (pw, pw), (0, 0)))

    # im2col: [N*To*Ho*Wo, kT*kH*kW*Cin], tap-major to match kernel layout
    cols = np.empty((n, to, ho, wo, kt * kh * kw, cin), dtype=np.float64)
    tap = 0
    for a in range(kt):
        for b in range(kh):
            for c in range(kw):
                cols[..., tap, :] = xp[
                    :, a : a + st * to : st, b : b + sh * ho : sh, c : c + sw * wo : sw, :
                ]
                tap += 1
    cols2 = cols.reshape(n * to * ho * wo, kt * kh * kw * cin)
    kmat = k.data.reshape(kt * kh * kw * cin, cout)
    y = (cols2 @ kmat).reshape(n, to, ho, wo, cout)

    def backward(g):
        g2 = g.reshape(n * to * ho * wo, cout)
        dk = (cols2.T @ g2).reshape(k.data.shape)
        dx = None
        if x.requires_grad:
            dcols = (g2 @ kmat.T).reshape(n, to, ho, wo, kt * kh * kw, cin)
            dxp = np.zeros((n, tp, hp, wp, cin), dtype=np.float64)
            tap = 0
            for a in range(kt):
                for b in range(kh):
                    for c in range(kw):
                        dxp[
                            :, a : a + st * to : st, b : b + sh * ho : sh, c : c + sw * wo : sw, :
                        ] += dcols[..., tap, :]
                        tap += 1
            dx = dxp[:, pt : pt + t, ph : ph + h, pw : pw + w, :] if (pt or ph or pw) else dxp
        return dx, dk

    return _track(y, (x, k), backward, "conv3d")


# ---------------------------------------------------------------------------
# pooling


def _pool_prepare(x: Tensor, window, stride):
    if x.data.ndim != 5:
        raise ValueError(f"pool input must be rank 5 [N,T,H,W,C], got {x.data.shape}")
    wt, wh, ww = _as_triple(window)
    st, sh, sw = _as_triple(stride) if stride is not None else (wt, wh, ww)
    n, t, h, w, c = x.data.shape
    if t < wt or h < wh or w < ww:
        raise ValueError(f"pool window ({wt},{wh},{ww}) exceeds input extents ({t},{h},{w})")
    to, ho, wo = (t - wt) // st + 1, (h - wh) // sh + 1, (w - ww) // sw + 1
    return (wt, wh, ww), (st, sh, sw), (to, ho, wo)


def _pool_slices(shape_out, win, strides):
    (to, ho, wo), (wt, wh, ww), (st, sh, sw) = shape_out, win, strides
    for a in range(wt):
        for b in range(wh):
            for c in range(ww):
                yield (
                    slice(a, a + st * to, st),
                    slice(b, b + sh * ho, sh),
                    slice(c, c + sw * wo, sw),
                )


def avgpool3d(x: Tensor, window, stride=None) -> Tensor:
    win, strides, out_sz = _pool_prepare(x, window, stride)
    n, _, _, _, c = x.data.shape
    to, ho, wo = out_sz
    count = win[0] * win[1] * win[2]
    y = np.zeros((n, to, ho, wo, c), dtype=np.float64)
    for sl in _pool_slices(out_sz, win, strides):
        y += x.data[:, sl[0], sl[1], sl[2], :]
    y /= count

    def backward(g):
        dx = np.zeros_like(x.data)
        gc = g / count
        for sl in _pool_slices(out_sz, win, strides):
            dx[:, sl[0], sl[1], sl[2], :] += gc
        return (dx,)

    return _track(y, (x,), backward, "avgpool3d")


def maxpool3d(x: Tensor, window, stride=None) -> Tensor:
    win, strides, out_sz = _pool_prepare(x, window, stride)
    n, _, _, _, c = x.data.shape
    to, ho, wo = out_sz
    taps = [x.data[:, sl[0], sl[1], sl[2], :] for sl in _pool_slices(out_sz, win, strides)]
    stacked = np.stack(taps, axis=0)
    arg = stacked.argmax(axis=0)  # first max wins on ties
    y = np.take_along_axis(stacked, arg[None], axis=0)[0]

    def backward(g):
        dx = np.zeros_like(x.data)
        for idx, sl in enumerate(_pool_slices(out_sz, win, strides)):
            dx[:, sl[0], sl[1], sl[2], :] += g * (arg == idx)
        return (dx,)

    return _track(y, (x,), backward, "maxpool3d")


# ---------------------------------------------------------------------------
# batch normalization


def batchnorm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    mode: str,
    momentum: float = 0.9,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel (last axis) normalization.

    Train mode normalizes with current-batch statistics and updates the
    running arrays in place (`running = momentum*running + (1-m)*batch`);
    eval mode reads the running arrays and has no side effects.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode {mode!r}")
    ch = x.data.shape[-1]
    if gamma.data.shape != (ch,) or beta.data.shape != (ch,):
        raise ValueError(f"gamma/beta must have shape ({ch},)")
    axes = tuple(range(x.data.ndim - 1))

    if mode == "eval":
        inv = 1.0 / np.sqrt(running_var + eps)
        xhat = (x.data - running_mean) * inv

        def backward_eval(g):
            return g * (gamma.data * inv), (g * xhat).sum(axis=axes), g.sum(axis=axes)

        return _track(gamma.data * xhat + beta.data, (x, gamma, beta), backward_eval, "batchnorm")

    if x.data.shape[0] < 2:
        raise ValueError(f"batchnorm train mode needs batch size >= 2, got {x.data.shape[0]}")
    count = x.data.size // ch
    mean = x.data.mean(axis=axes)
    var = x.data.var(axis=axes)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean) * inv
    running_mean[...] = momentum * running_mean + (1.0 - momentum) * mean
    running_var[...] = momentum * running_var + (1.0 - momentum) * var

    def backward_train(g):
        dgamma = (g * xhat).sum(axis=axes)
        dbeta = g.sum(axis=axes)
        dxhat = g * gamma.data
        dx = (inv / count) * (
            count * dxhat - dxhat.sum(axis=axes) - xhat * (dxhat * xhat).sum(axis=axes)
        )
        return dx, dgamma, dbeta

    return _track(gamma.data * xhat + beta.data, (x, gamma, beta), backward_train, "batchnorm")


# ---------------------------------------------------------------------------
# loss


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax of a plain array."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax_cross_entropy(
    logits: Tensor,
    target,
    weights: Optional[np.ndarray] = None,
    normalizer: Optional[float] = None,
) -> Tensor:
    """Cross entropy between softmax(logits) and hard or soft targets.

    target: int array [N] of class indices, or float array [N,C] of
    distributions (rows must sum to 1 +- 1e-9). Returns a scalar:
    sum_i weights_i * H_i / normalizer, defaulting to the batch mean.
    Targets are constants; gradients flow to logits only.
    """
    if logits.data.ndim != 2:
        raise ValueError(f"logits must be [N,C], got {logits.data.shape}")
    n, c = logits.data.shape
    tgt = np.asarray(target)
    if tgt.ndim == 1:
        if tgt.shape != (n,):
            raise ValueError(f"hard target shape {tgt.shape} != ({n},)")
        if not np.issubdtype(tgt.dtype, np.integer):
            raise ValueError("hard targets must be integers")
        if tgt.min() < 0 or tgt.max() >= c:
            raise ValueError(f"hard target out of range [0, {c}): {tgt}")
        soft = None
    elif tgt.ndim == 2:
        if tgt.shape != (n, c):
            raise ValueError(f"soft target shape {tgt.shape} != {(n, c)}")
        sums = tgt.sum(axis=1)
        if np.abs(sums - 1.0).max() > 1e-9:
            raise ValueError(f"soft target rows must sum to 1 +- 1e-9, got sums {sums}")
        soft = tgt.astype(np.float64)
    else:
        raise ValueError(f"target must be rank 1 or 2, got rank {tgt.ndim}")

    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (n,):
        raise ValueError(f"weights shape {w.shape} != ({n},)")
    norm = float(n) if normalizer is None else float(normalizer)

    ls = log_softmax(logits.data)
    if soft is None:
        per = -ls[np.arange(n), tgt]
    else:
        per = -(soft * ls).sum(axis=1)
    value = np.asarray((w * per).sum() / norm)

    def backward(g):
        p = np.exp(ls)
        if soft is None:
            gmat = p.copy()
            gmat[np.arange(n), tgt] -= 1.0
        else:
            gmat = p - soft
        return (g * gmat * (w / norm)[:, None],)

    return _track(value, (logits,), backward, "softmax_cross_entropy")


# ---------------------------------------------------------------------------
# gradient checking


@dataclass
class GradCheckReport:
    name: str
    max_rel_error: float
    tol: float
    eps: float
    per_input: list[float]

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tol


def grad_check(
    fn: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    eps: float = 1e-5,
    tol: float = 1e-4,
    name: str = "op",
    projection_seed: int = 0,
) -> GradCheckReport:
    """Compare tape gradients of `fn` against central finite differences.

    `fn` maps the input tensors to a tensor of any shape and must be a
    pure, deterministic function of them (fix dropout keys in a closure).
    The output is contracted with a fixed random projection to a scalar.
    Relative error is |a - n| / max(1, |a|, |n|), reported at its max
    over every element of every input.
    """
    if not 0.0 < eps <= 1e-2:
        raise ValueError(f"eps must be in (0, 1e-2], got {eps}")
    for t in inputs:
        if not np.all(np.isfinite(t.data)):
            raise ValueError("grad_check inputs must be finite")

    with Tape() as tape:
        y = fn(*inputs)
        proj = rng_from(projection_seed, "grad-check-projection").standard_normal(y.data.shape)
        s = weighted_sum(y, proj)
        analytic = tape.gradients(s, inputs)

    def scalar_eval() -> float:
        return float((fn(*inputs).data * proj).sum())

    per_input: list[float] = []
    for t, a in zip(inputs, analytic):
        flat = t.data.reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = scalar_eval()
            flat[i] = orig - eps
            down = scalar_eval()
            flat[i] = orig
            numeric = (up - down) / (2.0 * eps)
            an = float(a.reshape(-1)[i])
            err = abs(an - numeric) / max(1.0, abs(an), abs(numeric))
            worst = max(worst, err)
        per_input.append(worst)
    worst_all = max(per_input) if per_input else 0.0
    return GradCheckReport(name, worst_all, tol, eps, per_input)


def gradient_suite(eps: float = 1e-5, tol: float = 1e-4) -> list[GradCheckReport]:
    """Finite-difference checks for every differentiable op in this module."""
    rng = rng_from(0, "gradient-suite")
    reports = []

    def t(shape, scale=1.0):
        return Tensor(rng.standard_normal(shape) * scale, requires_grad=True)

    x = t((2, 3, 5, 5, 2))
    k = t((2, 3, 3, 2, 3), scale=0.5)
    reports.append(grad_check(lambda a, b: conv3d(a, b, stride=1, padding=0), [x, k],
                              eps, tol, name="conv3d/valid"))
    xs = t((1, 4, 6, 6, 2))
    ks = t((3, 3, 3, 2, 2), scale=0.5)
    reports.append(grad_check(lambda a, b: conv3d(a, b, stride=2, padding="same"), [xs, ks],
                              eps, tol, name="conv3d/stride2-same"))

    xb = t((4, 2, 2, 2, 3))
    gm = Tensor(1.0 + 0.1 * rng.standard_normal(3), requires_grad=True)
    bt = t((3,), scale=0.1)
    rm, rv = np.zeros(3), np.ones(3)
    reports.append(grad_check(
        lambda a, g, b: batchnorm(a, g, b, rm.copy(), rv.copy(), mode="train"),
        [xb, gm, bt], eps, tol, name="batchnorm/train"))
    rm2 = rng.standard_normal(3) * 0.1
    rv2 = 1.0 + 0.2 * rng.random(3)
    reports.append(grad_check(
        lambda a, g, b: batchnorm(a, g, b, rm2, rv2, mode="eval"),
        [xb, gm, bt], eps, tol, name="batchnorm/eval"))

    lg = t((5, 4))
    hard = np.array([0, 3, 1, 2, 2])
    reports.append(grad_check(lambda a: softmax_cross_entropy(a, hard), [lg],
                              eps, tol, name="softmax_cross_entropy/hard"))
    soft = softmax(rng.standard_normal((5, 4)))
    reports.append(grad_check(lambda a: softmax_cross_entropy(a, soft), [lg],
                              eps, tol, name="softmax_cross_entropy/soft"))
    wts = rng.random(5)
    reports.append(grad_check(
        lambda a: softmax_cross_entropy(a, hard, weights=wts, normalizer=7.0), [lg],
        eps, tol, name="softmax_cross_entropy/weighted"))

    # probe relu away from its kink by more than 10*eps
    xr = Tensor(np.sign(rng.standard_normal((4, 4))) * (0.5 + rng.random((4, 4))),
                requires_grad=True)
    reports.append(grad_check(relu, [xr], eps, tol, name="relu"))

    xp = t((2, 4, 4, 4, 2))
    reports.append(grad_check(lambda a: avgpool3d(a, 2), [xp], eps, tol, name="avgpool3d"))
    reports.append(grad_check(lambda a: maxpool3d(a, 2), [xp], eps, tol, name="maxpool3d"))
    reports.append(grad_check(lambda a: avgpool3d(a, (1, 2, 2), stride=(1, 1, 1)), [xp],
                              eps, tol, name="avgpool3d/overlap"))

    xl, wl, bl = t((3, 6)), t((6, 4)), t((4,))
    reports.append(grad_check(linear, [xl, wl, bl], eps, tol, name="linear"))

    xd = t((3, 8))
    reports.append(grad_check(
        lambda a: dropout(a, 0.4, key=(0, 7, 1), mode="train"), [xd],
        eps, tol, name="dropout"))

    xa, xb2 = t((3, 4)), t((4,))
    reports.append(grad_check(add, [xa, xb2], eps, tol, name="add/broadcast"))
    reports.append(grad_check(lambda a: scale(a, -2.5), [xa], eps, tol, name="scale"))
    reports.append(grad_check(lambda a: reshape(a, (2, 6)), [xa], eps, tol, name="reshape"))
    return reports
