"""Network assembly: layer graphs, weight init, freezing, forward/backward.

A :class:`Model` is an ordered list of :class:`LayerSpec` nodes plus the
instantiated parameter tensors for the conv and dense nodes.  Two
builders are provided: ``build_vgg16`` (13 conv layers in five blocks,
global average pooling in place of the fifth max-pool, then a dropout
and dense head) and ``build_vgg_tiny`` (a three-block miniature with the
same layer kinds, small enough to train in seconds).

Forward passes record a trace of per-node caches; ``backward`` consumes
the trace in reverse and returns a gradient table keyed like
``parameters()`` ("conv1.weight", "dense2.bias", ...).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import ShapeMismatch
from .rng import Rng

FREEZE_NONE = "none"
FREEZE_FEATURES = "freeze_features"
FREEZE_POLICIES = (FREEZE_NONE, FREEZE_FEATURES)


@dataclass(frozen=True)
class LayerSpec:
    """One node of the network graph.

    ``kind`` is one of conv, relu, maxpool, gap, dense, dropout,
    softmax.  ``name`` is set only for parameterized kinds (conv,
    dense); ``width`` is the conv output-channel or dense output-feature
    count; ``p`` is the dropout probability.
    """

    kind: str
    name: str | None = None
    width: int | None = None
    p: float | None = None


class Model:
    """Sequential network with named conv/dense parameter tensors."""

    def __init__(
        self,
        specs: list[LayerSpec],
        conv: dict[str, nn.ConvLayer],
        dense: dict[str, nn.DenseLayer],
        input_size: int,
        in_channels: int = 1,
        arch: str = "custom",
    ):
        if specs[-1].kind != "softmax":
            raise ValueError("layer list must end with softmax")
        self.specs = specs
        self.conv = conv
        self.dense = dense
        self.input_size = input_size
        self.in_channels = in_channels
        self.arch = arch
        self.mode = "eval"

    def layer(self, name: str) -> nn.ConvLayer | nn.DenseLayer:
        return self.conv[name] if name in self.conv else self.dense[name]

    def parameters(self) -> dict[str, np.ndarray]:
        """Name -> tensor view, in network order (insertion-ordered)."""
        table: dict[str, np.ndarray] = {}
        for spec in self.specs:
            if spec.kind in ("conv", "dense"):
                layer = self.layer(spec.name)
                table[f"{spec.name}.weight"] = layer.weight
                table[f"{spec.name}.bias"] = layer.bias
        return table

    def frozen_param_names(self) -> frozenset[str]:
        frozen = set()
        for name, layer in list(self.conv.items()) + list(self.dense.items()):
            if layer.frozen:
                frozen.add(f"{name}.weight")
                frozen.add(f"{name}.bias")
        return frozenset(frozen)

    def param_count(self) -> int:
        return sum(p.size for p in self.parameters().values())

    def trainable_param_count(self) -> int:
        frozen = self.frozen_param_names()
        return sum(p.size for n, p in self.parameters().items() if n not in frozen)

    def _prepare_input(self, batch: np.ndarray) -> np.ndarray:
        if batch.ndim != 4:
            raise ShapeMismatch(f"batch must be [N, C, H, W], got {batch.shape}")
        n, c, h, w = batch.shape
        if (h, w) != (self.input_size, self.input_size):
            raise ShapeMismatch(
                f"batch is {h}x{w}, model expects {self.input_size}x{self.input_size}"
            )
        if c == self.in_channels:
            return batch
        if c == 1 and self.in_channels > 1:
            return np.repeat(batch, self.in_channels, axis=1)
        raise ShapeMismatch(f"batch has {c} channels, model expects {self.in_channels}")

    def forward_logits(
        self, batch: np.ndarray, mode: str = "eval", rng: Rng | None = None
    ) -> tuple[np.ndarray, list[tuple]]:
        """Run every node up to the final softmax; return (logits, trace).

        Train mode engages dropout (drawing masks from ``rng`` in node
        order); eval mode skips it.  The trace holds exactly what
        :meth:`backward` needs, one entry per executed node.
        """
        if mode not in ("train", "eval"):
            raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
        self.mode = mode
        h = self._prepare_input(batch)
        trace: list[tuple] = []
        for spec in self.specs:
            kind = spec.kind
            if kind == "conv":
                trace.append((kind, spec.name, h))
                h = nn.conv2d_forward(h, self.conv[spec.name])
            elif kind == "relu":
                trace.append((kind, None, h))
                h = nn.relu(h)
            elif kind == "maxpool":
                h, routing = nn.maxpool2(h)
                trace.append((kind, None, routing))
            elif kind == "gap":
                trace.append((kind, None, h.shape))
                h = nn.global_avg_pool(h)
            elif kind == "dropout":
                h, mask = nn.dropout(h, spec.p, mode, rng)
                trace.append((kind, None, (mask, spec.p)))
            elif kind == "dense":
                trace.append((kind, spec.name, h))
                h = nn.dense_forward(h, self.dense[spec.name])
            elif kind == "softmax":
                break
            else:
                raise ValueError(f"unknown layer kind {kind!r}")
        return h, trace

    def forward(
        self, batch: np.ndarray, mode: str = "eval", rng: Rng | None = None
    ) -> np.ndarray:
        """Class probabilities [N, num_classes], rows summing to 1."""
        logits, _ = self.forward_logits(batch, mode, rng)
        return nn.softmax(logits)

    def backward(self, trace: list[tuple], dlogits: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients for every parameter, keyed like :meth:`parameters`."""
        grads: dict[str, np.ndarray] = {}
        d = dlogits
        for kind, name, cache in reversed(trace):
            if kind == "conv":
                d, dw, db = nn.conv2d_backward(cache, self.conv[name], d)
                grads[f"{name}.weight"] = dw
                grads[f"{name}.bias"] = db
            elif kind == "relu":
                d = nn.relu_backward(cache, d)
            elif kind == "maxpool":
                d = nn.maxpool2_backward(cache, d)
            elif kind == "gap":
                d = nn.gap_backward(d, cache[2], cache[3])
            elif kind == "dropout":
                d = nn.dropout_backward(d, cache[0], cache[1])
            elif kind == "dense":
                d, dw, db = nn.dense_backward(cache, self.dense[name], d)
                grads[f"{name}.weight"] = dw
                grads[f"{name}.bias"] = db
        return grads


def _conv(in_ch: int, out_ch: int, dtype=np.float32) -> nn.ConvLayer:
    return nn.ConvLayer(
        weight=np.zeros((out_ch, in_ch, nn.KERNEL, nn.KERNEL), dtype=dtype),
        bias=np.zeros(out_ch, dtype=dtype),
    )


def _dense(in_f: int, out_f: int, dtype=np.float32) -> nn.DenseLayer:
    return nn.DenseLayer(
        weight=np.zeros((out_f, in_f), dtype=dtype),
        bias=np.zeros(out_f, dtype=dtype),
    )


def _assemble(
    blocks: list[list[int]],
    last_block_pools: bool,
    head_widths: list[int],
    num_classes: int,
    input_size: int,
    in_channels: int,
    dropout_p: float,
    arch: str,
) -> Model:
    """Shared builder: conv blocks, GAP, dropout/dense head, softmax."""
    specs: list[LayerSpec] = []
    conv: dict[str, nn.ConvLayer] = {}
    dense: dict[str, nn.DenseLayer] = {}
    ch = in_channels
    idx = 0
    for b, widths in enumerate(blocks):
        for width in widths:
            idx += 1
            name = f"conv{idx}"
            conv[name] = _conv(ch, width)
            specs.append(LayerSpec("conv", name, width))
            specs.append(LayerSpec("relu"))
            ch = width
        if b < len(blocks) - 1 or last_block_pools:
            specs.append(LayerSpec("maxpool"))
    specs.append(LayerSpec("gap"))
    feat = ch
    didx = 0
    for width in head_widths:
        didx += 1
        name = f"dense{didx}"
        specs.append(LayerSpec("dropout", p=dropout_p))
        dense[name] = _dense(feat, width)
        specs.append(LayerSpec("dense", name, width))
        specs.append(LayerSpec("relu"))
        feat = width
    didx += 1
    name = f"dense{didx}"
    dense[name] = _dense(feat, num_classes)
    specs.append(LayerSpec("dense", name, num_classes))
    specs.append(LayerSpec("softmax"))
    return Model(specs, conv, dense, input_size, in_channels, arch)


def build_vgg16(num_classes: int = 2, replicate_channels: int = 1) -> Model:
    """Thirteen 3x3 conv layers in blocks 64-64 / 128-128 / 256x3 / 512x3
    / 512x3 with 2x2 max-pools between blocks, global average pooling in
    place of the fifth pool, then Dropout(0.3), Dense 256, ReLU,
    Dropout(0.3), Dense 256, ReLU, Dense ``num_classes``, Softmax.

    ``replicate_channels`` sets the first conv's input channel count;
    pass 3 to load three-channel pretrained weights (single-channel
    batches are replicated across channels at forward time).
    """
    if replicate_channels not in (1, 3):
        raise ValueError("replicate_channels must be 1 or 3")
    return _assemble(
        blocks=[[64, 64], [128, 128], [256, 256, 256], [512, 512, 512], [512, 512, 512]],
        last_block_pools=False,
        head_widths=[256, 256],
        num_classes=num_classes,
        input_size=224,
        in_channels=replicate_channels,
        dropout_p=0.3,
        arch="vgg16",
    )


def build_vgg_tiny(input_size: int = 64, num_classes: int = 2) -> Model:
    """Miniature of the same shape family: blocks 8 / 16 / 32 each
    followed by a max-pool, GAP, Dropout(0.3), Dense 32, ReLU,
    Dropout(0.3), Dense ``num_classes``, Softmax."""
    if input_size % 8:
        raise ValueError(f"input_size must be divisible by 8, got {input_size}")
    return _assemble(
        blocks=[[8], [16], [32]],
        last_block_pools=True,
        head_widths=[32],
        num_classes=num_classes,
        input_size=input_size,
        in_channels=1,
        dropout_p=0.3,
        arch="vgg_tiny",
    )


def build_model(arch: str, input_size: int | None = None, num_classes: int = 2) -> Model:
    """Builder dispatch by architecture name."""
    if arch == "vgg16":
        return build_vgg16(num_classes=num_classes)
    if arch == "vgg_tiny":
        return build_vgg_tiny(input_size=input_size or 64, num_classes=num_classes)
    raise ValueError(f"unknown architecture {arch!r}")


def apply_freeze_policy(model: Model, policy: str) -> Model:
    """freeze_features pins every conv layer and thaws every dense
    layer; none thaws everything.  Returns the same model."""
    if policy not in FREEZE_POLICIES:
        raise ValueError(f"unknown freeze policy {policy!r}")
    feature_frozen = policy == FREEZE_FEATURES
    for layer in model.conv.values():
        layer.frozen = feature_frozen
    for layer in model.dense.values():
        layer.frozen = False
    return model


def he_normal(rng: Rng, shape: tuple[int, ...], fan_in: int, dtype=np.float32) -> np.ndarray:
    """He-normal draw: zero-mean gaussians scaled by sqrt(2 / fan_in)."""
    size = int(np.prod(shape))
    std = math.sqrt(2.0 / fan_in)
    return (rng.normals(size) * std).reshape(shape).astype(dtype)


def init_weights(model: Model, rng: Rng) -> Model:
    """He-normal weights, zero biases, drawn in network order."""
    for spec in model.specs:
        if spec.kind == "conv":
            layer = model.conv[spec.name]
            fan_in = layer.in_channels * nn.KERNEL * nn.KERNEL
            layer.weight[...] = he_normal(rng, layer.weight.shape, fan_in, layer.weight.dtype)
            layer.bias[...] = 0
        elif spec.kind == "dense":
            layer = model.dense[spec.name]
            layer.weight[...] = he_normal(
                rng, layer.weight.shape, layer.in_features, layer.weight.dtype
            )
            layer.bias[...] = 0
    return model
