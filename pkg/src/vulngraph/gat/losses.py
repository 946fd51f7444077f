"""Class-imbalance losses. Each returns the loss and its gradient w.r.t. the
class-probability vector."""

from __future__ import annotations

import logging

import numpy as np

log = logging.getLogger(__name__)

EPS = 1e-12

clamp_events = 0


def _clamped(p: float) -> float:
    global clamp_events
    if p < EPS:
        clamp_events += 1
        log.warning("probability %.3g clamped to %g", p, EPS)
        return EPS
    return p


def class_weights(n_safe: int, n_vuln: int) -> tuple[float, float]:
    """w0 = 1, w1 = (N0 + N1) / (2 N1)."""
    if n_vuln < 1:
        raise ValueError("no vulnerable samples: class weights undefined")
    return 1.0, (n_safe + n_vuln) / (2.0 * n_vuln)


def weighted_ce(probs: np.ndarray, y: int, weights=(1.0, 1.0)) -> tuple[float, np.ndarray]:
    p_raw = float(probs[y])
    p = _clamped(p_raw)
    w = weights[y]
    grad = np.zeros_like(probs, dtype=np.float64)
    if p_raw >= EPS:
        grad[y] = -w / p
    return -w * np.log(p), grad


def focal_alpha(y: int, alpha: float) -> float:
    if alpha >= 1.0:
        return 1.0
    return alpha if y == 1 else 1.0 - alpha


def focal_loss(probs: np.ndarray, y: int, alpha: float = 1.0, gamma: float = 2.0) -> tuple[float, np.ndarray]:
    """-a_y (1 - p_y)^gamma log p_y, with a_1 = alpha and a_0 = 1 - alpha (or 1 when alpha = 1)."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    p_raw = float(probs[y])
    p = _clamped(p_raw)
    a = focal_alpha(y, alpha)
    q = 1.0 - p
    loss = -a * q**gamma * np.log(p)
    grad = np.zeros_like(probs, dtype=np.float64)
    if p_raw >= EPS:
        mod_grad = gamma * q ** (gamma - 1.0) * np.log(p) if gamma > 0 and q > 0 else 0.0
        grad[y] = -a * (q**gamma / p - mod_grad)
    return float(loss), grad


def batch_mean(losses) -> float:
    losses = list(losses)
    return float(np.mean(losses)) if losses else 0.0


FOCAL_PRESETS = [(1.0, 2.0), (0.95, 2.5), (0.90, 2.5), (0.85, 3.0), (0.80, 3.0)]
