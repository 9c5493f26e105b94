"""Minimal dense-network toolkit: ReLU stacks, manual backprop, Adam.

Parameters are kept as a flat list ``[W0, b0, W1, b1, ...]`` so optimizers and
serializers can treat every network the same way.
"""

from __future__ import annotations

import numpy as np


def he_init(rng: np.random.Generator, n_in: int, n_out: int):
    W = rng.normal(0.0, np.sqrt(2.0 / max(n_in, 1)), size=(n_in, n_out))
    return W, np.zeros(n_out)


class DenseStack:
    """Fully connected layers with ReLU between them.

    ``final_relu`` controls whether the last layer is also rectified (an
    "input block") or linear (an output head).  Inverted dropout is applied
    after every rectified layer when training.
    """

    def __init__(self, sizes, rng=None, final_relu=False, dropout=0.0, params=None):
        self.sizes = [int(s) for s in sizes]
        if len(self.sizes) < 2 or min(self.sizes) < 1:
            raise ValueError(f"invalid layer sizes {sizes}")
        self.final_relu = bool(final_relu)
        self.dropout = float(dropout)
        if params is None:
            rng = np.random.default_rng(0) if rng is None else rng
            params = []
            for n_in, n_out in zip(self.sizes[:-1], self.sizes[1:]):
                params.extend(he_init(rng, n_in, n_out))
        self.params = [np.asarray(p, dtype=float) for p in params]

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def _relu_at(self, i: int) -> bool:
        return i < self.n_layers - 1 or self.final_relu

    def forward(self, X, train=False, rng=None):
        h = np.asarray(X, dtype=float)
        cache = []
        for i in range(self.n_layers):
            W, b = self.params[2 * i], self.params[2 * i + 1]
            z = h @ W + b
            mask = None
            if self._relu_at(i):
                out = np.maximum(z, 0.0)
                if train and self.dropout > 0:
                    keep = 1.0 - self.dropout
                    mask = (rng.random(out.shape) < keep) / keep
                    out = out * mask
            else:
                out = z
            cache.append((h, z, mask))
            h = out
        return h, cache

    def backward(self, cache, dout):
        """Return ``(grads, dX)`` for upstream gradient ``dout``."""
        grads = [None] * len(self.params)
        d = np.asarray(dout, dtype=float)
        for i in reversed(range(self.n_layers)):
            h_in, z, mask = cache[i]
            if self._relu_at(i):
                if mask is not None:
                    d = d * mask
                d = d * (z > 0)
            grads[2 * i] = h_in.T @ d
            grads[2 * i + 1] = d.sum(axis=0)
            d = d @ self.params[2 * i].T
        return grads, d

    def predict(self, X):
        return self.forward(X, train=False)[0]

    def copy(self) -> "DenseStack":
        return DenseStack(
            self.sizes, final_relu=self.final_relu, dropout=self.dropout,
            params=[p.copy() for p in self.params],
        )

    def to_dict(self) -> dict:
        return {
            "sizes": self.sizes,
            "final_relu": self.final_relu,
            "dropout": self.dropout,
            "params": [p.tolist() for p in self.params],
        }

    @classmethod
    def from_dict(cls, d) -> "DenseStack":
        return cls(d["sizes"], final_relu=d["final_relu"], dropout=d["dropout"], params=d["params"])


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
