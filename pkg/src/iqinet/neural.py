"""Small dense networks in numpy with exact reverse-mode gradients.

Inputs are batched row-wise: ``x`` has shape ``(batch, features)``.
Everything runs in float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence

import numpy as np

ACTIVATIONS = ("relu", "linear", "softmax")
PROB_FLOOR = 1e-12


@dataclass
class Dense:
    weight: np.ndarray  # (units, inputs)
    bias: np.ndarray  # (units,)
    activation: str = "linear"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ValueError("weight must be (units, inputs) and bias (units,)")

    @property
    def inputs(self) -> int:
        return self.weight.shape[1]

    @property
    def units(self) -> int:
        return self.weight.shape[0]


@dataclass
class DenseNet:
    layers: List[Dense]

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.units != b.inputs:
                raise ValueError(f"layer sizes do not chain: {a.units} -> {b.inputs}")
        for layer in self.layers[:-1]:
            if layer.activation == "softmax":
                raise ValueError("softmax is only allowed on the output layer")

    @property
    def input_size(self) -> int:
        return self.layers[0].inputs

    @property
    def output_size(self) -> int:
        return self.layers[-1].units

    @property
    def shape(self) -> list[int]:
        return [self.input_size] + [layer.units for layer in self.layers]

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.weight, layer.bias]
        return out

    def copy(self) -> "DenseNet":
        return DenseNet([Dense(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers])

    def __call__(self, x) -> np.ndarray:
        return forward(self, x)[0]


@dataclass
class Gradients:
    """Per-parameter gradients mirroring a :class:`DenseNet`, plus the input gradient."""

    weight: List[np.ndarray]
    bias: List[np.ndarray]
    inputs: np.ndarray

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weight, self.bias):
            out += [w, b]
        return out


@dataclass
class Cache:
    inputs: List[np.ndarray] = field(default_factory=list)
    preacts: List[np.ndarray] = field(default_factory=list)
    output: np.ndarray | None = None


def glorot_init(shape: Sequence[int], activations: Sequence[str], rng: np.random.Generator) -> DenseNet:
    """Glorot-uniform weights, zero biases. ``shape`` lists inputs then the width of each layer."""
    if len(activations) != len(shape) - 1:
        raise ValueError("need one activation per layer")
    layers = []
    for fan_in, fan_out, act in zip(shape[:-1], shape[1:], activations):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        layers.append(Dense(w, np.zeros(fan_out), act))
    return DenseNet(layers)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "softmax":
        return softmax(z)
    return z


def forward(net: DenseNet, x) -> tuple[np.ndarray, Cache]:
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.shape[1] != net.input_size:
        raise ValueError(f"expected {net.input_size} input features, got {x.shape[1]}")
    cache = Cache()
    a = x
    for layer in net.layers:
        cache.inputs.append(a)
        z = a @ layer.weight.T + layer.bias
        cache.preacts.append(z)
        a = _activate(z, layer.activation)
    cache.output = a
    return (a[0] if squeeze else a), cache


def backward(net: DenseNet, cache: Cache, output_grad, wrt_logits: bool = False) -> Gradients:
    """Reverse-mode gradients of ``sum(output_grad * output)``.

    For a softmax head, ``wrt_logits=True`` means ``output_grad`` is already the
    gradient with respect to the pre-softmax logits (e.g. ``p - u`` from
    :func:`cce_loss`).
    """
    g = np.asarray(output_grad, dtype=np.float64)
    if g.ndim == 1:
        g = g[None, :]
    if g.shape != cache.output.shape:
        raise ValueError(f"output gradient shape {g.shape} != output shape {cache.output.shape}")
    n = len(net.layers)
    dw: list = [None] * n
    db: list = [None] * n
    for i in range(n - 1, -1, -1):
        layer = net.layers[i]
        z = cache.preacts[i]
        if layer.activation == "relu":
            g = g * (z > 0)
        elif layer.activation == "softmax" and not wrt_logits:
            p = cache.output
            g = p * (g - np.sum(g * p, axis=1, keepdims=True))
        dw[i] = g.T @ cache.inputs[i]
        db[i] = g.sum(axis=0)
        g = g @ layer.weight
    return Gradients(dw, db, g)


def cce_loss(p, onehot) -> tuple[np.ndarray, np.ndarray]:
    """Categorical cross-entropy ``-log p[true]`` per row, and the fused softmax gradient ``p - u``."""
    p = np.asarray(p, dtype=np.float64)
    u = np.asarray(onehot, dtype=np.float64)
    if p.shape != u.shape:
        raise ValueError("probability and one-hot shapes differ")
    if not (np.all((u == 0) | (u == 1)) and np.all(u.sum(axis=-1) == 1)):
        raise ValueError("malformed one-hot target")
    if np.any(np.abs(p.sum(axis=-1) - 1.0) > 1e-9):
        raise ValueError("probabilities do not sum to one")
    loss = -np.log(np.maximum(np.sum(p * u, axis=-1), PROB_FLOOR))
    return loss, p - u


def cce_from_indices(p: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Per-row ``-log p[idx]`` without building one-hot arrays."""
    return -np.log(np.maximum(p[np.arange(len(idx)), idx], PROB_FLOOR))


@dataclass
class Optimizer:
    """SGD or Adam state for one network."""

    kind: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.kind!r}")

    def step(self, net: DenseNet, grads: Gradients) -> DenseNet:
        params = net.parameters()
        gs = grads.parameters()
        if len(params) != len(gs) or any(p.shape != g.shape for p, g in zip(params, gs)):
            raise ValueError("gradient shapes do not match the network")
        if self.kind == "sgd":
            for p, g in zip(params, gs):
                p -= self.lr * g
            self.step_count += 1
            return net
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1**t
        c2 = 1.0 - self.beta2**t
        for p, g, m, v in zip(params, gs, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return net


def optimizer_step(net: DenseNet, grads: Gradients, opt: Optimizer) -> DenseNet:
    return opt.step(net, grads)


# -- checkpoints -------------------------------------------------------------

_HEADER = "iqinet-densenet 1"


def _fmt(values: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in values)


def dumps(net: DenseNet) -> str:
    lines = [_HEADER, f"layers {len(net.layers)}"]
    for layer in net.layers:
        lines.append(f"dense {layer.inputs} {layer.units} {layer.activation}")
        for row in layer.weight:
            lines.append(_fmt(row))
        lines.append(_fmt(layer.bias))
    return "\n".join(lines) + "\n"


def loads(text: str) -> DenseNet:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != _HEADER:
        raise ValueError("not an iqinet network checkpoint")
    pos = 1
    count = int(lines[pos].split()[1])
    pos += 1
    layers = []
    for _ in range(count):
        tag, n_in, n_out, act = lines[pos].split()
        if tag != "dense":
            raise ValueError(f"unexpected layer record {lines[pos]!r}")
        n_in, n_out = int(n_in), int(n_out)
        pos += 1
        w = np.array([[float(v) for v in lines[pos + r].split()] for r in range(n_out)]).reshape(n_out, n_in)
        pos += n_out
        b = np.array([float(v) for v in lines[pos].split()]).reshape(n_out)
        pos += 1
        layers.append(Dense(w, b, act))
    return DenseNet(layers)


def save(net: DenseNet, path) -> None:
    Path(path).write_text(dumps(net))


def load(path) -> DenseNet:
    return loads(Path(path).read_text())
