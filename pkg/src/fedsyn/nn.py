"""Dense feed-forward networks with hand-written backpropagation.

Only the layers needed for small GANs are supported: ``Dense``,
``LeakyRelu``, ``Sigmoid`` and ``Dropout``. All arithmetic runs in float64.
Dense weights are stored as ``(in_dim, out_dim)`` so a layer computes
``x @ W + b``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .exceptions import AlignmentError, DomainError, NumericDomainError
from .params import ParamSet

BCE_EPS = 1e-7


@dataclass(frozen=True)
class Dense:
    in_dim: int
    out_dim: int


@dataclass(frozen=True)
class LeakyRelu:
    slope: float = 0.2


@dataclass(frozen=True)
class Sigmoid:
    pass


@dataclass(frozen=True)
class Dropout:
    rate: float = 0.3


Layer = Union[Dense, LeakyRelu, Sigmoid, Dropout]


class Arch:
    """Ordered layer stack.

    Consecutive ``Dense`` layers must agree on their shared dimension.
    Parameter names are ``w{k}``/``b{k}`` for the k-th dense layer.
    """

    def __init__(self, layers: Sequence[Layer]):
        layers = tuple(layers)
        if not any(isinstance(l, Dense) for l in layers):
            raise AlignmentError("an architecture needs at least one Dense layer")
        width = None
        for layer in layers:
            if isinstance(layer, Dense):
                if layer.in_dim < 1 or layer.out_dim < 1:
                    raise AlignmentError(f"bad Dense dimensions {layer}")
                if width is not None and layer.in_dim != width:
                    raise AlignmentError(
                        f"Dense({layer.in_dim}, {layer.out_dim}) follows a layer of width {width}"
                    )
                width = layer.out_dim
            elif isinstance(layer, Dropout):
                if not 0.0 <= layer.rate < 1.0:
                    raise DomainError(f"dropout rate must lie in [0, 1), got {layer.rate}")
            elif not isinstance(layer, (LeakyRelu, Sigmoid)):
                raise TypeError(f"unsupported layer {layer!r}")
        self.layers = layers

    def __repr__(self) -> str:
        return f"Arch({list(self.layers)!r})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Arch) and self.layers == other.layers

    def __hash__(self) -> int:
        return hash(self.layers)

    @property
    def dense_layers(self) -> list[Dense]:
        return [l for l in self.layers if isinstance(l, Dense)]

    @property
    def in_dim(self) -> int:
        return self.dense_layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.dense_layers[-1].out_dim

    @property
    def has_dropout(self) -> bool:
        return any(isinstance(l, Dropout) and l.rate > 0 for l in self.layers)

    def layout(self) -> tuple[tuple[str, tuple[int, ...]], ...]:
        out = []
        for k, d in enumerate(self.dense_layers):
            out.append((f"w{k}", (d.in_dim, d.out_dim)))
            out.append((f"b{k}", (d.out_dim,)))
        return tuple(out)

    def check_params(self, params: ParamSet) -> None:
        if params.layout != self.layout():
            raise AlignmentError(
                f"parameters {params.layout!r} do not match architecture layout {self.layout()!r}"
            )


def init_params(arch: Arch, rng: np.random.Generator, std: float = 0.02) -> ParamSet:
    """Weights ~ Normal(0, std), biases zero."""
    entries = []
    for name, shape in arch.layout():
        if name.startswith("w"):
            entries.append((name, rng.normal(0.0, std, size=shape)))
        else:
            entries.append((name, np.zeros(shape)))
    return ParamSet(entries)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class Tape:
    """Activations cached by :func:`forward` for :func:`backward`."""

    arch: Arch
    params: ParamSet
    inputs: list  # input to each layer
    masks: dict  # layer index -> dropout mask (already scaled)
    outputs: np.ndarray


def forward(arch: Arch, params: ParamSet, batch, mode: str = "eval", rng: np.random.Generator | None = None):
    """Run ``batch`` through the network.

    Returns ``(outputs, tape)``. In ``"eval"`` mode dropout is the identity
    and ``rng`` is never touched.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    arch.check_params(params)
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != arch.in_dim:
        raise AlignmentError(f"expected a batch of shape (n, {arch.in_dim}), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericDomainError("non-finite values in network input")
    train = mode == "train"
    if train and arch.has_dropout and rng is None:
        raise ValueError("train mode with dropout needs an rng")

    inputs, masks = [], {}
    k = 0
    for i, layer in enumerate(arch.layers):
        inputs.append(x)
        if isinstance(layer, Dense):
            x = x @ params[f"w{k}"] + params[f"b{k}"]
            k += 1
        elif isinstance(layer, LeakyRelu):
            x = np.where(x > 0, x, layer.slope * x)
        elif isinstance(layer, Sigmoid):
            x = _sigmoid(x)
        elif isinstance(layer, Dropout):
            if train and layer.rate > 0:
                keep = 1.0 - layer.rate
                mask = (rng.random(x.shape) < keep) / keep
                masks[i] = mask
                x = x * mask
    return x, Tape(arch, params, inputs, masks, x)


def backward(arch: Arch, tape: Tape, upstream_grad, return_input_grad: bool = False):
    """Backpropagate ``upstream_grad`` (d loss / d outputs) through ``tape``.

    Returns a :class:`ParamSet` of gradients aligned with the forward
    parameters, plus the gradient with respect to the network input when
    ``return_input_grad`` is true.
    """
    if tape.arch != arch:
        raise AlignmentError("tape was recorded with a different architecture")
    g = np.asarray(upstream_grad, dtype=np.float64)
    if g.shape != tape.outputs.shape:
        raise AlignmentError(f"upstream gradient shape {g.shape} != output shape {tape.outputs.shape}")

    grads = {}
    k = len(arch.dense_layers)
    for i in range(len(arch.layers) - 1, -1, -1):
        layer = arch.layers[i]
        x = tape.inputs[i]
        if isinstance(layer, Dense):
            k -= 1
            w = tape.params[f"w{k}"]
            grads[f"w{k}"] = x.T @ g
            grads[f"b{k}"] = g.sum(axis=0)
            g = g @ w.T
        elif isinstance(layer, LeakyRelu):
            g = np.where(x > 0, g, layer.slope * g)
        elif isinstance(layer, Sigmoid):
            y = tape.inputs[i + 1] if i + 1 < len(tape.inputs) else tape.outputs
            g = g * y * (1.0 - y)
        elif isinstance(layer, Dropout):
            if i in tape.masks:
                g = g * tape.masks[i]
    out = ParamSet((name, grads[name]) for name, _ in arch.layout())
    if return_input_grad:
        return out, g
    return out


def bce_loss(pred, labels, eps: float = BCE_EPS):
    """Mean binary cross-entropy and its gradient with respect to ``pred``.

    ``pred`` is clamped to ``[eps, 1 - eps]`` first. Works elementwise on
    vectors or matrices; the mean runs over every element.
    """
    p = np.asarray(pred, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape:
        if p.size == y.size and p.ndim <= 2 and y.ndim <= 2:
            y = y.reshape(p.shape)
        else:
            raise AlignmentError(f"pred shape {p.shape} and labels shape {y.shape} differ")
    if p.size == 0:
        raise AlignmentError("bce_loss needs at least one prediction")
    p = np.clip(p, eps, 1.0 - eps)
    loss = -np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    grad = (p - y) / (p * (1.0 - p)) / p.size
    return float(loss), grad
