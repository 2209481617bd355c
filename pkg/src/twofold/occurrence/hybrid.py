"""Single-hidden-layer network predicting next-period demand from
inter-arrival inputs; a positive output flags demand occurrence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

HYBRID_INPUTS = [
    "last_period_demand",
    "gap_between_last_two_demands",
    "periods_since_last_demand",
    "periods_since_last_zero",
]


class NoModelError(ValueError):
    """Inputs are degenerate; the caller should fall back to another model."""


@dataclass(frozen=True)
class HybridParams:
    hidden: int = 5
    epochs: int = 500
    learning_rate: float = 0.1


@dataclass
class HybridMLP:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    x_mean: np.ndarray
    x_std: np.ndarray
    y_scale: float

    def output(self, X) -> np.ndarray:
        X = (np.asarray(X, dtype=float) - self.x_mean) / self.x_std
        hidden = expit(X @ self.w1 + self.b1)
        return (hidden @ self.w2 + self.b2) * self.y_scale

    def predict(self, X) -> tuple[np.ndarray, np.ndarray]:
        """``(flags, raw outputs)``; demand is flagged when the output is positive."""
        out = self.output(X)
        return out > 0, out


def hybrid_inputs(values: np.ndarray, cutoff: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Network inputs for targets ``target`` seeing periods ``0..cutoff``.

    All positions are indices on one regular grid (the weekday grid in the
    pipeline).  Missing quantities (no demand yet, no zero yet) fall back to
    the number of visible periods.
    """
    values = np.asarray(values, dtype=float)
    cutoff = np.asarray(cutoff, dtype=int)
    target = np.asarray(target, dtype=int)
    demand = np.flatnonzero(values > 0)
    zero = np.flatnonzero(values <= 0)
    k = np.searchsorted(demand, cutoff, side="right")
    kz = np.searchsorted(zero, cutoff, side="right")
    age = (cutoff + 1).astype(float)
    last_val = np.where(cutoff >= 0, values[np.clip(cutoff, 0, max(len(values) - 1, 0))], 0.0)
    if len(demand):
        last_d = demand[np.maximum(k - 1, 0)]
        prev_d = demand[np.maximum(k - 2, 0)]
    else:
        last_d = prev_d = np.zeros_like(k)
    gap = np.where(k >= 2, last_d - prev_d, age)
    since_d = np.where(k >= 1, target - last_d, target + 1)
    last_z = zero[np.maximum(kz - 1, 0)] if len(zero) else np.zeros_like(kz)
    since_z = np.where(kz >= 1, target - last_z, target + 1)
    return np.column_stack([last_val, gap, since_d, since_z]).astype(float)


def fit_hybrid_mlp(values, horizon_steps: int = 1, params: HybridParams = HybridParams(),
                   seed: int = 0, train_targets=None) -> HybridMLP:
    """Train by full-batch gradient descent on squared error.

    ``train_targets`` are the grid positions used as training examples
    (default: every position with at least ``horizon_steps`` of history).
    """
    values = np.asarray(values, dtype=float)
    if np.count_nonzero(values > 0) < 2:
        raise NoModelError("hybrid network needs at least two demand periods")
    if train_targets is None:
        train_targets = np.arange(horizon_steps, len(values))
    train_targets = np.asarray(train_targets, dtype=int)
    if len(train_targets) < 2:
        raise NoModelError("too few training periods")
    X = hybrid_inputs(values, train_targets - horizon_steps, train_targets)
    y = values[train_targets]
    x_mean = X.mean(axis=0)
    x_std = X.std(axis=0)
    x_std[x_std == 0] = 1.0
    y_scale = float(values[values > 0].mean())
    Z = (X - x_mean) / x_std
    t = y / y_scale

    rng = np.random.default_rng(seed)
    n_in = Z.shape[1]
    w1 = rng.normal(0, 1 / np.sqrt(n_in), (n_in, params.hidden))
    b1 = np.zeros(params.hidden)
    w2 = rng.normal(0, 1 / np.sqrt(params.hidden), params.hidden)
    b2 = 0.0
    lr = params.learning_rate
    n = len(t)
    for _ in range(params.epochs):
        h = expit(Z @ w1 + b1)
        err = h @ w2 + b2 - t
        d_out = 2 * err / n
        g_w2 = h.T @ d_out
        g_b2 = d_out.sum()
        d_h = np.outer(d_out, w2) * h * (1 - h)
        w1 -= lr * (Z.T @ d_h)
        b1 -= lr * d_h.sum(axis=0)
        w2 -= lr * g_w2
        b2 -= lr * g_b2
    return HybridMLP(w1, b1, w2, float(b2), x_mean, x_std, y_scale)
