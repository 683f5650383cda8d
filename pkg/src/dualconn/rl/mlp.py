"""Fixed-topology multilayer perceptron with hand-written backpropagation.

Hidden layers use the rectifier, the output layer is affine. Inputs may be a
single vector of shape ``(n_in,)`` or a batch of shape ``(B, n_in)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class Mlp:
    widths: tuple
    weights: list  # weights[l] has shape (widths[l], widths[l + 1])
    biases: list

    def __post_init__(self):
        self.widths = tuple(int(w) for w in self.widths)
        if len(self.widths) < 2 or min(self.widths) < 1:
            raise ValueError(f"invalid layer widths {self.widths}")
        if len(self.weights) != len(self.widths) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("one weight matrix and bias vector per layer transition")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.widths[l], self.widths[l + 1]) or b.shape != (self.widths[l + 1],):
                raise ValueError(f"layer {l} parameter shape mismatch")

    @classmethod
    def init(cls, widths, rng: np.random.Generator, out_scale: float = 1.0) -> "Mlp":
        """He-normal hidden layers, uniform output layer, zero biases.

        ``out_scale`` shrinks the output layer; near-zero values start every
        action with the same value in every state.
        """
        widths = tuple(int(w) for w in widths)
        weights, biases = [], []
        n_layers = len(widths) - 1
        for l in range(n_layers):
            fan_in, fan_out = widths[l], widths[l + 1]
            if l < n_layers - 1:
                w = rng.standard_normal((fan_in, fan_out)) * math.sqrt(2.0 / fan_in)
            else:
                bound = out_scale / math.sqrt(fan_in)
                w = rng.uniform(-bound, bound, (fan_in, fan_out))
            weights.append(w)
            biases.append(np.zeros(fan_out))
        return cls(widths, weights, biases)

    @classmethod
    def zeros(cls, widths) -> "Mlp":
        widths = tuple(int(w) for w in widths)
        return cls(
            widths,
            [np.zeros((widths[l], widths[l + 1])) for l in range(len(widths) - 1)],
            [np.zeros(widths[l + 1]) for l in range(len(widths) - 1)],
        )

    @property
    def n_in(self) -> int:
        return self.widths[0]

    @property
    def n_out(self) -> int:
        return self.widths[-1]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def params(self) -> list:
        """Flat list [W0, b0, W1, b1, ...] of the live arrays."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "Mlp":
        return Mlp(self.widths, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def load_from(self, other: "Mlp") -> None:
        if other.widths != self.widths:
            raise ValueError("layer widths differ")
        for dst, src in zip(self.params(), other.params()):
            dst[...] = src

    def polyak(self, online: "Mlp", tau: float) -> None:
        """self <- tau * online + (1 - tau) * self, in place."""
        for dst, src in zip(self.params(), online.params()):
            dst *= 1.0 - tau
            dst += tau * src

    def forward(self, x) -> np.ndarray:
        return mlp_forward(self, x)


def _check_input(net: Mlp, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim not in (1, 2) or x.shape[-1] != net.n_in:
        raise ValueError(f"input shape {x.shape} does not match input width {net.n_in}")
    return x


def _forward_cache(net: Mlp, x: np.ndarray):
    acts = [x]
    pre = []
    h = x
    last = len(net.weights) - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        pre.append(z)
        h = z if l == last else np.maximum(z, 0.0)
        acts.append(h)
    return acts, pre


def mlp_forward(net: Mlp, x) -> np.ndarray:
    """Q-values for one state (shape (S,)) or a batch (shape (B, S))."""
    x = _check_input(net, x)
    return _forward_cache(net, x)[0][-1]


def mlp_backward(net: Mlp, x, upstream) -> list:
    """Gradients of ``sum(upstream * forward(x))`` w.r.t. every parameter.

    Returned in the order of :meth:`Mlp.params`. For a batch input the
    gradients are summed over the batch.
    """
    x = _check_input(net, x)
    g = np.asarray(upstream, dtype=float)
    out_shape = x.shape[:-1] + (net.n_out,)
    if g.shape != out_shape:
        raise ValueError(f"upstream gradient shape {g.shape}, expected {out_shape}")
    acts, pre = _forward_cache(net, x)
    if x.ndim == 1:
        acts = [a[None, :] for a in acts]
        pre = [z[None, :] for z in pre]
        g = g[None, :]
    grads = [None] * (2 * len(net.weights))
    delta = g
    for l in range(len(net.weights) - 1, -1, -1):
        grads[2 * l] = acts[l].T @ delta
        grads[2 * l + 1] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ net.weights[l].T) * (pre[l - 1] > 0.0)
    return grads


class Sgd:
    def __init__(self, params, lr: float):
        self.params = params
        self.lr = lr

    def step(self, grads) -> None:
        for p, g in zip(self.params, grads):
            p -= self.lr * g


class Adam:
    def __init__(self, params, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def make_optimizer(name: str, params, lr: float):
    if name == "adam":
        return Adam(params, lr)
    if name == "sgd":
        return Sgd(params, lr)
    raise ValueError(f"unknown optimizer {name!r}")
