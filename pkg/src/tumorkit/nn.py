"""From-scratch differentiable layer kernels and the Adam update.

Tensors are plain numpy arrays in [N, C, H, W] (or [N, features]) layout,
float32 for training and float64 when checking gradients.  Every kernel
is a pure function of its inputs: forward passes return outputs (plus
whatever the backward pass needs), backward passes take the forward
inputs and the output cotangent and return exact gradients.

Convolution is cross-correlation (no kernel flip) with a fixed 3x3
kernel, stride 1, and zero padding 1, so spatial size is preserved.
Pooling is 2x2 max with stride 2.  Dropout is inverted (survivors are
scaled at train time; evaluation is the identity).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import BadTargets, InvalidProbability, OddSpatialDim, ShapeMismatch
from .rng import Rng

KERNEL = 3
PAD = 1


@dataclass
class ConvLayer:
    """3x3 stride-1 pad-1 convolution parameters."""

    weight: np.ndarray  # [out, in, 3, 3]
    bias: np.ndarray  # [out]
    frozen: bool = False

    def __post_init__(self):
        if self.weight.ndim != 4 or self.weight.shape[2:] != (KERNEL, KERNEL):
            raise ShapeMismatch(f"conv weight must be [out, in, 3, 3], got {self.weight.shape}")
        if self.bias.shape != (self.weight.shape[0],):
            raise ShapeMismatch(f"conv bias {self.bias.shape} vs weight {self.weight.shape}")

    @property
    def in_channels(self) -> int:
        return self.weight.shape[1]

    @property
    def out_channels(self) -> int:
        return self.weight.shape[0]


@dataclass
class DenseLayer:
    """Fully connected layer parameters, y = x W^T + b."""

    weight: np.ndarray  # [out, in]
    bias: np.ndarray  # [out]
    frozen: bool = False

    def __post_init__(self):
        if self.weight.ndim != 2:
            raise ShapeMismatch(f"dense weight must be 2-d, got {self.weight.shape}")
        if self.bias.shape != (self.weight.shape[0],):
            raise ShapeMismatch(f"dense bias {self.bias.shape} vs weight {self.weight.shape}")

    @property
    def in_features(self) -> int:
        return self.weight.shape[1]

    @property
    def out_features(self) -> int:
        return self.weight.shape[0]


def _check_nchw(x: np.ndarray, channels: int, op: str) -> None:
    if x.ndim != 4:
        raise ShapeMismatch(f"{op} expects [N, C, H, W], got {x.shape}")
    if x.shape[1] != channels:
        raise ShapeMismatch(f"{op} expects {channels} channels, got {x.shape[1]}")


def conv2d_forward(x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    """Cross-correlate ``x`` [N, C, H, W] with the layer kernel, add bias."""
    _check_nchw(x, layer.in_channels, "conv2d")
    xp = np.pad(x, ((0, 0), (0, 0), (PAD, PAD), (PAD, PAD)))
    windows = sliding_window_view(xp, (KERNEL, KERNEL), axis=(2, 3))  # [N,C,H,W,3,3]
    y = np.tensordot(windows, layer.weight, axes=([1, 4, 5], [1, 2, 3]))  # [N,H,W,out]
    y = np.moveaxis(y, 3, 1)
    return np.ascontiguousarray(y + layer.bias[None, :, None, None]).astype(x.dtype, copy=False)


def conv2d_backward(
    x: np.ndarray, layer: ConvLayer, dy: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dx, dw, db) of :func:`conv2d_forward`.

    Gradients are computed even for frozen layers; whether they are
    applied is the optimizer's decision (``layer.frozen``).
    """
    _check_nchw(x, layer.in_channels, "conv2d_backward")
    expected = (x.shape[0], layer.out_channels, x.shape[2], x.shape[3])
    if dy.shape != expected:
        raise ShapeMismatch(f"dy shape {dy.shape}, expected {expected}")

    xp = np.pad(x, ((0, 0), (0, 0), (PAD, PAD), (PAD, PAD)))
    windows = sliding_window_view(xp, (KERNEL, KERNEL), axis=(2, 3))
    dw = np.tensordot(dy, windows, axes=([0, 2, 3], [0, 2, 3]))  # [out, C, 3, 3]
    db = dy.sum(axis=(0, 2, 3))

    # dx is the "full" correlation of dy with the flipped kernel
    dyp = np.pad(dy, ((0, 0), (0, 0), (KERNEL - 1, KERNEL - 1), (KERNEL - 1, KERNEL - 1)))
    dy_windows = sliding_window_view(dyp, (KERNEL, KERNEL), axis=(2, 3))
    w_flip = layer.weight[:, :, ::-1, ::-1]
    dxp = np.tensordot(dy_windows, w_flip, axes=([1, 4, 5], [0, 2, 3]))  # [N,H+2,W+2,C]
    dxp = np.moveaxis(dxp, 3, 1)
    dx = dxp[:, :, PAD : PAD + x.shape[2], PAD : PAD + x.shape[3]]
    return (
        np.ascontiguousarray(dx).astype(x.dtype, copy=False),
        dw.astype(layer.weight.dtype, copy=False),
        db.astype(layer.bias.dtype, copy=False),
    )


def maxpool2(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """2x2 stride-2 max pool; returns (output, routing).

    ``routing`` holds each window's argmax position in row-major window
    order (ties go to the first), which is all the backward pass needs.
    """
    if x.ndim != 4:
        raise ShapeMismatch(f"maxpool2 expects [N, C, H, W], got {x.shape}")
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise OddSpatialDim(f"spatial dims must be even, got {h}x{w}")
    tiles = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    flat = tiles.reshape(n, c, h // 2, w // 2, 4)
    routing = flat.argmax(axis=-1).astype(np.int8)  # first max in row-major order
    y = np.take_along_axis(flat, routing[..., None].astype(np.intp), axis=-1)[..., 0]
    return np.ascontiguousarray(y), routing


def maxpool2_backward(routing: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """Route each dy element back to its window's argmax position."""
    if dy.shape != routing.shape:
        raise ShapeMismatch(f"dy shape {dy.shape} vs routing {routing.shape}")
    n, c, h2, w2 = dy.shape
    flat = np.zeros((n, c, h2, w2, 4), dtype=dy.dtype)
    np.put_along_axis(flat, routing[..., None].astype(np.intp), dy[..., None], axis=-1)
    dx = flat.reshape(n, c, h2, w2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return np.ascontiguousarray(dx.reshape(n, c, h2 * 2, w2 * 2))


def global_avg_pool(x: np.ndarray) -> np.ndarray:
    """Per-channel spatial mean: [N, C, H, W] -> [N, C]."""
    if x.ndim != 4:
        raise ShapeMismatch(f"global_avg_pool expects [N, C, H, W], got {x.shape}")
    return x.mean(axis=(2, 3))


def gap_backward(dy: np.ndarray, h: int, w: int) -> np.ndarray:
    """Spread dy / (h * w) uniformly over the pooled window."""
    scale = dy / (h * w)
    return np.broadcast_to(scale[:, :, None, None], dy.shape + (h, w)).astype(dy.dtype)


def relu(x: np.ndarray) -> np.ndarray:
    """max(0, x) elementwise."""
    return np.maximum(x, 0)


def relu_backward(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """Pass dy where x > 0; the subgradient at exactly 0 is taken as 0."""
    if x.shape != dy.shape:
        raise ShapeMismatch(f"x shape {x.shape} vs dy {dy.shape}")
    return dy * (x > 0)


def dense_forward(x: np.ndarray, layer: DenseLayer) -> np.ndarray:
    """y = x W^T + b for x of shape [N, in]."""
    if x.ndim != 2 or x.shape[1] != layer.in_features:
        raise ShapeMismatch(f"dense expects [N, {layer.in_features}], got {x.shape}")
    return x @ layer.weight.T + layer.bias


def dense_backward(
    x: np.ndarray, layer: DenseLayer, dy: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (dx, dw, db) of :func:`dense_forward`."""
    if x.ndim != 2 or x.shape[1] != layer.in_features:
        raise ShapeMismatch(f"dense expects [N, {layer.in_features}], got {x.shape}")
    if dy.shape != (x.shape[0], layer.out_features):
        raise ShapeMismatch(f"dy shape {dy.shape} vs [{x.shape[0]}, {layer.out_features}]")
    return dy @ layer.weight, dy.T @ x, dy.sum(axis=0)


def dropout(
    x: np.ndarray, p: float, mode: str, rng: Rng | None = None
) -> tuple[np.ndarray, np.ndarray | None]:
    """Inverted dropout; returns (output, keep mask).

    Train mode zeroes each element with probability ``p`` and scales
    survivors by 1/(1-p); eval mode is the identity (mask is None).
    Mask elements are drawn from ``rng`` in row-major order.
    """
    if not 0 <= p < 1:
        raise InvalidProbability(f"dropout probability {p} not in [0, 1)")
    if mode == "eval" or p == 0.0:
        return x, None
    if mode != "train":
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    draws = rng.randoms(x.size).reshape(x.shape)
    mask = draws >= p
    return (x * mask / (1.0 - p)).astype(x.dtype, copy=False), mask


def dropout_backward(dy: np.ndarray, mask: np.ndarray | None, p: float) -> np.ndarray:
    """Apply the forward mask and scale to the cotangent."""
    if mask is None:
        return dy
    return (dy * mask / (1.0 - p)).astype(dy.dtype, copy=False)


def softmax(z: np.ndarray) -> np.ndarray:
    """Softmax along the last axis, computed with max subtraction."""
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_ce_loss(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean categorical cross-entropy and its fused gradient wrt logits.

    ``targets`` must be one-hot rows.  Probabilities are clamped at 1e-12
    inside the log; the gradient is (softmax(logits) - targets) / N.
    """
    if logits.shape != targets.shape or logits.ndim != 2:
        raise ShapeMismatch(f"logits {logits.shape} vs targets {targets.shape}")
    is01 = (targets == 0) | (targets == 1)
    if not is01.all() or not (targets.sum(axis=1) == 1).all():
        raise BadTargets("each target row must be one-hot")
    n = logits.shape[0]
    probs = softmax(logits)
    picked = np.clip((probs * targets).sum(axis=1), 1e-12, None)
    loss = float(-np.log(picked).mean())
    dlogits = ((probs - targets) / n).astype(logits.dtype, copy=False)
    return loss, dlogits


@dataclass
class AdamState:
    """Adam moments and step counter, keyed by parameter name."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    frozen: frozenset[str] | set[str] = frozenset(),
) -> None:
    """One Adam update, in place on ``params``.

    Frozen parameters are skipped entirely: no moment is allocated or
    updated for them.  Moments are lazily zero-initialized on first use.
    """
    state.t += 1
    t = state.t
    for name, p in params.items():
        if name in frozen:
            continue
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeMismatch(f"gradient {name} has shape {g.shape}, param {p.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * np.square(g)
        m_hat = m / (1 - state.beta1**t)
        v_hat = v / (1 - state.beta2**t)
        p -= (state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.dtype, copy=False)
