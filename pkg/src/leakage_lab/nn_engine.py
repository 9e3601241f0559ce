"""Small dense networks in numpy with hand-written backprop and Adam.

A network is a list of :class:`Dense` layers, each computing
``act(x @ W + b)`` with ``W`` shaped ``(fan_in, fan_out)``.  Forward passes
return a cache that :func:`backward` consumes; gradients are returned in the
same order as :meth:`DenseNet.params`.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.special import expit

from .errors import CheckpointError, DomainError

ACTIVATIONS = ("identity", "relu", "softmax", "softplus")
_TAGS = {name: i for i, name in enumerate(ACTIVATIONS)}

MAGIC = b"LLNN"
FORMAT_VERSION = 1
PROB_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------


def softmax(logits):
    z = np.asarray(logits, dtype=float)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softplus(x):
    return np.logaddexp(0.0, x)


def _activate(name, pre):
    if name == "identity":
        return pre
    if name == "relu":
        return np.maximum(pre, 0.0)
    if name == "softmax":
        return softmax(pre)
    return softplus(pre)


def _activation_backward(name, pre, out, g):
    if name == "identity":
        return g
    if name == "relu":
        return g * (pre > 0)  # subgradient 0 at the kink
    if name == "softmax":
        return out * (g - np.sum(g * out, axis=-1, keepdims=True))
    return g * expit(pre)


# ---------------------------------------------------------------------------
# network
# ---------------------------------------------------------------------------


@dataclass
class Dense:
    weight: np.ndarray
    bias: np.ndarray
    activation: str = "identity"
    dropout: float = 0.0

    def __post_init__(self):
        if self.activation not in _TAGS:
            raise DomainError(f"unknown activation {self.activation!r}")
        self.weight = np.asarray(self.weight, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise DomainError("weight must be (fan_in, fan_out) and bias (fan_out,)")
        if not 0.0 <= self.dropout < 1.0:
            raise DomainError("dropout rate must lie in [0, 1)")


@dataclass
class DenseNet:
    layers: List[Dense]

    def __post_init__(self):
        if not self.layers:
            raise DomainError("a network needs at least one layer")
        for prev, nxt in zip(self.layers[:-1], self.layers[1:]):
            if prev.weight.shape[1] != nxt.weight.shape[0]:
                raise DomainError("layer dimensions do not chain")
            if prev.activation == "softmax":
                raise DomainError("softmax is only allowed on the final layer")

    @property
    def in_dim(self):
        return self.layers[0].weight.shape[0]

    @property
    def out_dim(self):
        return self.layers[-1].weight.shape[1]

    @property
    def parameter_count(self):
        return sum(l.weight.size + l.bias.size for l in self.layers)

    def params(self):
        out = []
        for layer in self.layers:
            out += [layer.weight, layer.bias]
        return out

    def with_params(self, params):
        """Copy of the network carrying ``params`` (same order as :meth:`params`)."""
        layers = [
            replace(layer, weight=np.array(params[2 * i]), bias=np.array(params[2 * i + 1]))
            for i, layer in enumerate(self.layers)
        ]
        return DenseNet(layers)


def init_dense(sizes: Sequence[int], activations: Sequence[str], seed=None, dropout=None) -> DenseNet:
    """Random network with weights ``N(0, 1/fan_in)`` and zero biases.

    Parameters
    ----------
    sizes : sequence of int
        Layer widths including the input, e.g. ``(1, 4, 2)``.
    activations : sequence of str
        One per layer, ``len(sizes) - 1`` entries.
    seed : int or Generator, optional
    dropout : sequence of float, optional
        Per-layer dropout rate applied to that layer's output during training.
    """
    if len(activations) != len(sizes) - 1:
        raise DomainError("need one activation per layer")
    rng = np.random.default_rng(seed)
    dropout = dropout or [0.0] * len(activations)
    layers = []
    for fan_in, fan_out, act, rate in zip(sizes[:-1], sizes[1:], activations, dropout):
        w = rng.standard_normal((fan_in, fan_out)) / math.sqrt(fan_in)
        layers.append(Dense(w, np.zeros(fan_out), act, rate))
    return DenseNet(layers)


@dataclass
class ForwardCache:
    inputs: list = field(default_factory=list)
    pre: list = field(default_factory=list)
    out: list = field(default_factory=list)
    masks: list = field(default_factory=list)


def forward_cache(net: DenseNet, x, rng: Optional[np.random.Generator] = None):
    """Forward pass keeping the intermediates needed by :func:`backward`.

    Dropout is applied only when ``rng`` is given (training mode).
    """
    h = np.asarray(x, dtype=float)
    if h.shape[-1] != net.in_dim:
        raise DomainError(f"input has dimension {h.shape[-1]}, network expects {net.in_dim}")
    cache = ForwardCache()
    for layer in net.layers:
        cache.inputs.append(h)
        pre = h @ layer.weight + layer.bias
        act = _activate(layer.activation, pre)
        mask = None
        if rng is not None and layer.dropout > 0:
            keep = 1.0 - layer.dropout
            mask = (rng.random(act.shape) < keep) / keep
        cache.pre.append(pre)
        cache.out.append(act)
        cache.masks.append(mask)
        h = act if mask is None else act * mask
    return h, cache


def forward(net: DenseNet, x):
    return forward_cache(net, x)[0]


def backward(net: DenseNet, cache: ForwardCache, grad_out):
    """Backpropagate ``dL/d(output)``.

    Leading axes of the input are treated as batch axes and summed over.

    Returns
    -------
    grads : list of ndarray
        Parameter gradients ordered as ``net.params()``.
    grad_input : ndarray
        ``dL/d(input)``, same shape as the forward input.
    """
    g = np.asarray(grad_out, dtype=float)
    grads = [None] * (2 * len(net.layers))
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        if cache.masks[i] is not None:
            g = g * cache.masks[i]
        g = _activation_backward(layer.activation, cache.pre[i], cache.out[i], g)
        inp = cache.inputs[i]
        grads[2 * i] = inp.reshape(-1, inp.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        grads[2 * i + 1] = g.reshape(-1, g.shape[-1]).sum(axis=0)
        g = g @ layer.weight.T
    return grads, g


def grad(net: DenseNet, x, loss: Callable):
    """Loss value and parameter gradients.

    ``loss(output)`` must return ``(value, dvalue/doutput)``.
    """
    out, cache = forward_cache(net, x)
    value, g_out = loss(out)
    if not np.isfinite(value):
        raise FloatingPointError(f"non-finite loss {value}")
    grads, _ = backward(net, cache, g_out)
    return float(value), grads


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


def cross_entropy(probs, label: int) -> float:
    """``-ln p[label]`` with the probability clamped at 1e-12."""
    p = np.asarray(probs, dtype=float)
    if not 0 <= label < p.shape[-1]:
        raise DomainError(f"label {label} out of range for {p.shape[-1]} classes")
    return float(-math.log(max(p[label], PROB_FLOOR)))


def mean_cross_entropy(probs, labels):
    """Mean cross-entropy over all leading axes and its gradient in ``probs``.

    ``probs`` has shape ``(..., G)``; ``labels`` broadcasts against the
    leading axes.
    """
    p = np.asarray(probs, dtype=float)
    labels = np.broadcast_to(np.asarray(labels), p.shape[:-1])
    if np.any(labels < 0) or np.any(labels >= p.shape[-1]):
        raise DomainError("label out of range")
    picked = np.take_along_axis(p, labels[..., None], axis=-1)[..., 0]
    clamped = np.maximum(picked, PROB_FLOOR)
    count = picked.size
    g = np.zeros_like(p)
    live = (picked >= PROB_FLOOR) / (clamped * count)
    np.put_along_axis(g, labels[..., None], -live[..., None], axis=-1)
    return float(-np.log(clamped).mean()), g


def squared_error(out, target):
    diff = np.asarray(out, dtype=float) - target
    return float(np.sum(diff * diff)), 2.0 * diff


# ---------------------------------------------------------------------------
# Gaussian head
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianHead:
    mu: np.ndarray
    log_sigma: np.ndarray

    @property
    def sigma(self):
        return np.exp(self.log_sigma)


def reparam_sample(head: GaussianHead, noise):
    """``z = mu + exp(log_sigma) * noise``.

    With ``noise`` held fixed, ``dz/dmu = 1`` and ``dz/dlog_sigma = sigma * noise``.
    """
    noise = np.asarray(noise, dtype=float)
    return head.mu + head.sigma * noise


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0
    lr: float = 1e-3
    b1: float = 0.9
    b2: float = 0.999
    eps: float = 1e-8


def adam_init(params, lr=1e-3, **kw) -> AdamState:
    return AdamState([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0, lr, **kw)


def adam_step(state: AdamState, params, grads):
    """One bias-corrected Adam update.  Returns ``(new_params, new_state)``."""
    if len(params) != len(grads):
        raise DomainError("params and grads differ in length")
    t = state.t + 1
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        g = np.asarray(g, dtype=float)
        if g.shape != np.shape(p):
            raise DomainError("gradient shape does not match its parameter")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient")
        m = state.b1 * m + (1.0 - state.b1) * g
        v = state.b2 * v + (1.0 - state.b2) * g * g
        m_hat = m / (1.0 - state.b1**t)
        v_hat = v / (1.0 - state.b2**t)
        new_p.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return new_p, replace(state, m=new_m, v=new_v, t=t)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(net: DenseNet, path) -> None:
    """Write ``net`` in the little-endian ``LLNN`` layout."""
    chunks = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(net.layers))]
    for layer in net.layers:
        rows, cols = layer.weight.shape
        chunks.append(struct.pack("<IIB", rows, cols, _TAGS[layer.activation]))
        chunks.append(np.ascontiguousarray(layer.weight, dtype="<f8").tobytes())
        chunks.append(np.ascontiguousarray(layer.bias, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def load_checkpoint(path) -> DenseNet:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise CheckpointError("not an LLNN checkpoint")
    if len(blob) < 12:
        raise CheckpointError("truncated header")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    pos, layers = 12, []
    for _ in range(count):
        if pos + 9 > len(blob):
            raise CheckpointError("truncated layer header")
        rows, cols, tag = struct.unpack_from("<IIB", blob, pos)
        pos += 9
        if tag >= len(ACTIVATIONS):
            raise CheckpointError(f"unknown activation tag {tag}")
        need = 8 * (rows * cols + cols)
        if pos + need > len(blob):
            raise CheckpointError("truncated layer payload")
        w = np.frombuffer(blob, "<f8", rows * cols, pos).reshape(rows, cols).astype(float)
        pos += 8 * rows * cols
        b = np.frombuffer(blob, "<f8", cols, pos).astype(float)
        pos += 8 * cols
        layers.append(Dense(w, b, ACTIVATIONS[tag]))
    if pos != len(blob):
        raise CheckpointError("trailing bytes after the last layer")
    return DenseNet(layers)
