"""Minimal dense networks with hand-written backprop, float64 throughout.

Small enough here (4-in regressors, 20-in encoders) that explicit numpy
matmuls beat pulling in a framework, and float64 keeps analytic gradients
checkable against central finite differences to tight tolerance.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError


class Mlp:
    """Fully connected net: linear layers with ReLU between, linear output."""

    def __init__(self, layer_sizes, seed: int):
        if len(layer_sizes) < 2:
            raise ConfigError("need at least input and output sizes")
        self.layer_sizes = tuple(int(n) for n in layer_sizes)
        self.seed = int(seed)
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.layer_sizes, self.layer_sizes[1:]):
            scale = np.sqrt(2.0 / fan_in)
            self.weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    def forward(self, x: np.ndarray):
        """Returns (output (B, out), cache for backward)."""
        x = np.asarray(x, dtype=np.float64)
        acts = [x]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ w + b
            if i < len(self.weights) - 1:
                z = np.maximum(z, 0.0)
            acts.append(z)
        return acts[-1], acts

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache, grad_out: np.ndarray):
        """Gradients of a scalar loss given d(loss)/d(output).

        Returns ([dW...], [db...], d(loss)/d(input)).
        """
        grad_w = [None] * len(self.weights)
        grad_b = [None] * len(self.biases)
        g = np.asarray(grad_out, dtype=np.float64)
        for i in reversed(range(len(self.weights))):
            a_in = cache[i]
            if i < len(self.weights) - 1:
                g = g * (cache[i + 1] > 0.0)
            grad_w[i] = a_in.T @ g
            grad_b[i] = g.sum(axis=0)
            g = g @ self.weights[i].T
        return grad_w, grad_b, g

    # flat views for optimizers, checkpoints, and finite-difference checks

    def get_flat(self) -> np.ndarray:
        return np.concatenate([w.ravel() for w in self.weights]
                              + [b.ravel() for b in self.biases])

    def set_flat(self, flat: np.ndarray) -> None:
        off = 0
        for w in self.weights:
            w[...] = flat[off:off + w.size].reshape(w.shape)
            off += w.size
        for b in self.biases:
            b[...] = flat[off:off + b.size]
            off += b.size

    @staticmethod
    def flatten_grads(grad_w, grad_b) -> np.ndarray:
        return np.concatenate([g.ravel() for g in grad_w] + [g.ravel() for g in grad_b])

    def clone(self) -> "Mlp":
        other = Mlp(self.layer_sizes, self.seed)
        other.set_flat(self.get_flat())
        return other


class Adam:
    """Adam over a flat parameter vector, with global-norm gradient clipping."""

    def __init__(self, n_params: int, lr=1e-3, beta1=0.9, beta2=0.999,
                 eps=1e-8, clip_norm=10.0):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def step(self, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
        if self.clip_norm is not None:
            norm = float(np.linalg.norm(grads))
            if norm > self.clip_norm:
                grads = grads * (self.clip_norm / norm)
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grads
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grads * grads
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def mse_loss_and_grad(pred: np.ndarray, target: np.ndarray):
    """Mean squared error over all elements and its gradient w.r.t. pred."""
    diff = pred - target
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def triplet_loss_and_grads(ea: np.ndarray, ep: np.ndarray, en: np.ndarray,
                           margin: float):
    """Hinge triplet loss max(0, ||a-p||^2 - ||a-n||^2 + margin), summed over
    the batch, plus gradients w.r.t. the three embedding batches."""
    dap = ea - ep
    dan = ea - en
    terms = (dap * dap).sum(axis=1) - (dan * dan).sum(axis=1) + margin
    active = terms > 0.0
    loss = float(terms[active].sum())
    act = active[:, None].astype(np.float64)
    ga = act * 2.0 * (dap - dan)
    gp = act * -2.0 * dap
    gn = act * 2.0 * dan
    return loss, ga, gp, gn


def finite_difference_grad(loss_fn, flat: np.ndarray, h: float = 1e-4,
                           indices=None) -> np.ndarray:
    """Central finite differences of loss_fn at flat, on all or chosen indices."""
    idx = range(flat.size) if indices is None else indices
    out = np.zeros(len(list(idx)) if indices is not None else flat.size)
    for j, i in enumerate(range(flat.size) if indices is None else indices):
        bumped = flat.copy()
        bumped[i] += h
        up = loss_fn(bumped)
        bumped[i] -= 2.0 * h
        down = loss_fn(bumped)
        out[j] = (up - down) / (2.0 * h)
    return out
