"""Central finite-difference gradient checking for the loss functions.

Random instances keep every probability at least ``edge_margin`` away from a
bin edge, since the losses are only differentiable away from the
measure-zero edge set.
"""

from __future__ import annotations

import numpy as np

from .calib_loss import ace_loss, ece_loss, mce_loss, softmax_with_grad
from .core import BinConfig

LOSSES = {"ace": ace_loss, "ece": ece_loss, "mce": mce_loss}


def central_difference(func, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Elementwise central difference (f(x+h) - f(x-h)) / 2h."""
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = func(x)
        flat[i] = orig - h
        f_minus = func(x)
        flat[i] = orig
        out[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max |a - n| / max(1, ||n||_inf), i.e. scaled to the gradient magnitude."""
    scale = max(1e-12, float(np.abs(numeric).max()), float(np.abs(analytic).max()))
    return float(np.abs(analytic - numeric).max() / scale)


def random_instance(rng: np.random.Generator, num_voxels: int, num_classes: int,
                    cfg: BinConfig, edge_margin: float = 1e-3):
    """Probabilities uniform within each bin's interior plus random labels."""
    m = cfg.num_bins
    bins = rng.integers(0, m, size=(num_classes, num_voxels))
    offset = rng.uniform(edge_margin, 1.0 - edge_margin, size=bins.shape)
    probs = (bins + offset) / m
    labels = rng.integers(0, num_classes, size=num_voxels)
    return probs, labels


def check_loss_gradient(loss_name: str, rng: np.random.Generator,
                        num_voxels: int = 48, num_classes: int = 2,
                        cfg: BinConfig | None = None, h: float = 1e-6) -> float:
    """Relative error between the analytic and central-difference gradient."""
    cfg = cfg or BinConfig(5)
    loss = LOSSES[loss_name]
    probs, labels = random_instance(rng, num_voxels, num_classes, cfg)
    analytic = loss(probs, labels, cfg).grad_probs
    numeric = central_difference(lambda p: loss(p, labels, cfg).value,
                                 probs.copy(), h=h)
    return relative_error(analytic, numeric)


def check_chained_gradient(loss_name: str, rng: np.random.Generator,
                           num_voxels: int = 32, num_classes: int = 2,
                           cfg: BinConfig | None = None, h: float = 1e-6) -> float:
    """Same check for loss(softmax(logits)) with respect to the logits."""
    cfg = cfg or BinConfig(5)
    loss = LOSSES[loss_name]
    edges = np.linspace(0.0, 1.0, cfg.num_bins + 1)
    for _ in range(1000):
        logits = rng.standard_normal((num_classes, num_voxels)) * 2.0
        p, _ = softmax_with_grad(logits)
        if np.abs(p[..., None] - edges).min() >= 1e-3:
            break
    labels = rng.integers(0, num_classes, size=num_voxels)

    def value(lg):
        probs, _ = softmax_with_grad(lg)
        return loss(probs, labels, cfg).value

    probs, back = softmax_with_grad(logits)
    analytic = back(loss(probs, labels, cfg).grad_probs)
    numeric = central_difference(value, logits.copy(), h=h)
    return relative_error(analytic, numeric)
