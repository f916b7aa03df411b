"""Loss, optimizer, and the per-epoch learning-rate decay.

Loss reduction is mean-over-batch so the learning rate keeps its meaning
regardless of batch size.
"""

from __future__ import annotations

import math

import numpy as np


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, stabilized by subtracting the row max."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _check_onehot(onehot: np.ndarray, k: int):
    if onehot.ndim != 2 or onehot.shape[1] != k:
        raise ValueError(f"labels must be [b,{k}] one-hot, got {onehot.shape}")
    ones = (onehot == 1.0).sum(axis=1)
    zeros = (onehot == 0.0).sum(axis=1)
    if not (np.all(ones == 1) and np.all(zeros == onehot.shape[1] - 1)):
        raise ValueError("labels are not one-hot")


def softmax_ce_forward(logits: np.ndarray, onehot: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean categorical cross-entropy over the batch; returns (loss, probs)."""
    if logits.shape != onehot.shape:
        raise ValueError(f"logits {logits.shape} vs labels {onehot.shape}")
    _check_onehot(onehot, logits.shape[1])
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    loss = float(-(onehot * log_probs).sum() / logits.shape[0])
    return loss, np.exp(log_probs)


def softmax_ce_backward(probs: np.ndarray, onehot: np.ndarray) -> np.ndarray:
    """Gradient of the mean cross-entropy w.r.t. the logits."""
    return (probs - onehot) / probs.shape[0]


class Adam:
    """Adam with bias correction; moment slots are keyed by parameter position."""

    def __init__(self, lr: float = 0.001, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: list[np.ndarray] = []
        self.v: list[np.ndarray] = []

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]):
        """Update ``params`` in place. Order must be stable across calls."""
        if len(params) != len(grads):
            raise ValueError("params and grads differ in length")
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        if len(self.m) != len(params):
            raise ValueError("parameter count changed between steps")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, (p, g) in enumerate(zip(params, grads)):
            if not np.all(np.isfinite(g)):
                raise FloatingPointError(f"non-finite gradient for parameter {i}")
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / (1 - b1 ** self.t)
            v_hat = self.v[i] / (1 - b2 ** self.t)
            p -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.dtype)


class ExponentialDecay:
    """Multiplies the base learning rate by exp(exponent) at each epoch end.

    An exponent of 0 disables the schedule.
    """

    def __init__(self, exponent: float = -0.01):
        self.exponent = exponent

    def __call__(self, lr: float) -> float:
        if lr <= 0:
            raise ValueError(f"lr must be positive, got {lr}")
        return lr * math.exp(self.exponent)
