"""Focal loss on logit scores, with first and second derivatives.

For a raw score ``z`` with ``p = sigmoid(z)`` and ``p_t`` the probability
given to the true class, the loss is ``-(1 - p_t)**gamma * log(p_t)``.
``gamma = 0`` is the ordinary log-loss.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

_EPS = 1e-300


def _parts(z, y):
    z = np.asarray(z, dtype=float)
    y = np.asarray(y).astype(bool)
    p = expit(z)
    sign = np.where(y, 1.0, -1.0)
    p_t = np.where(y, p, 1.0 - p)
    u = np.where(y, 1.0 - p, p)  # 1 - p_t, computed without cancellation
    log_pt = np.log(np.maximum(p_t, _EPS))
    return sign, p_t, u, log_pt


def focal_loss(z, y, gamma: float = 2.0) -> np.ndarray:
    _, _, u, log_pt = _parts(z, y)
    return -(u ** gamma) * log_pt


def focal_grad(z, y, gamma: float = 2.0) -> np.ndarray:
    """d loss / d z."""
    sign, p_t, u, log_pt = _parts(z, y)
    return sign * (gamma * u ** gamma * p_t * log_pt - u ** (gamma + 1))


def focal_grad_hess(z, y, gamma: float = 2.0) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and (unclipped) second derivative with respect to ``z``.

    The second derivative turns negative for badly misclassified points
    when ``gamma > 0``; boosting clips it before use.
    """
    sign, p_t, u, log_pt = _parts(z, y)
    grad = sign * (gamma * u ** gamma * p_t * log_pt - u ** (gamma + 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        first = np.where(u > 0, -gamma * u ** (gamma - 1) * p_t * log_pt, 0.0)
    dh = gamma * (first + u ** gamma * (log_pt + 1.0)) + (gamma + 1) * u ** gamma
    return grad, dh * p_t * u


def newton_hessian(z, y, gamma: float = 2.0, floor: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and the curvature used for Newton leaf values.

    The exact second derivative is floored at ``(1 - p_t)**gamma * p * (1 - p)``,
    the log-loss curvature under the focal weight, so misclassified points
    (where the exact value is small or negative) cannot produce unbounded
    steps.  At ``gamma = 0`` this is the exact log-loss hessian.
    """
    grad, hess = focal_grad_hess(z, y, gamma)
    _, p_t, u, _ = _parts(z, y)
    return grad, np.maximum(np.maximum(hess, u ** gamma * p_t * u), floor)


def logloss_grad_hess(z, y) -> tuple[np.ndarray, np.ndarray]:
    p = expit(np.asarray(z, dtype=float))
    y = np.asarray(y).astype(float)
    return p - y, p * (1.0 - p)
