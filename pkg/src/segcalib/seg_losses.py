"""Base segmentation losses with analytic gradients, plus the Dice score.

Cross-entropy is offered both over probabilities (with clamping) and fused
from logits (softmax folded in) for numerical stability. Combined losses
are weighted sums, so their gradients add by linearity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calib_loss import LossOutput, ace_loss, ece_loss, mce_loss
from .core import BinConfig, validate_label_map
from .errors import ConfigError

CE_CLAMP = 1e-12

_CALIB_TERMS = {"ace": ace_loss, "ece": ece_loss, "mce": mce_loss}


@dataclass(frozen=True)
class LossSpec:
    """Weighted sum of loss terms, e.g. [("dice", 1.0), ("ace", 1.0)]."""

    terms: tuple[tuple[str, float], ...]

    def __post_init__(self):
        if not self.terms:
            raise ConfigError("loss spec needs at least one term")
        for name, weight in self.terms:
            if name not in ("ce", "dice", "ace", "ece", "mce"):
                raise ConfigError(f"unknown loss term {name!r}")
            if not np.isfinite(weight) or weight < 0:
                raise ConfigError(f"weight for {name!r} must be finite and >= 0")

    def __str__(self) -> str:
        return "+".join(f"{n}:{w:g}" for n, w in self.terms)


def parse_loss_spec(text: str) -> LossSpec:
    """Parse "dice+ace" or "ce:1.0+ace:0.5" into a LossSpec (weight default 1)."""
    terms = []
    for chunk in text.split("+"):
        chunk = chunk.strip()
        if not chunk:
            raise ConfigError(f"empty term in loss spec {text!r}")
        if ":" in chunk:
            name, _, raw = chunk.partition(":")
            try:
                weight = float(raw)
            except ValueError:
                raise ConfigError(f"bad weight {raw!r} in loss spec {text!r}") from None
        else:
            name, weight = chunk, 1.0
        terms.append((name.strip(), weight))
    return LossSpec(tuple(terms))


def _onehot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    flat = labels.reshape(-1)
    if num_classes == 1:  # single marginal channel: labels are its indicator
        return (labels != 0).astype(np.float64)[None]
    out = np.zeros((num_classes, flat.size), dtype=np.float64)
    out[flat, np.arange(flat.size)] = 1.0
    return out.reshape((num_classes,) + labels.shape)


def ce_loss(probs: np.ndarray, labels: np.ndarray) -> LossOutput:
    """Mean negative log probability of the labelled class.

    Probabilities are clamped at 1e-12 before the log; the gradient is
    -1/(N p) at the labelled channel and zero elsewhere.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    num_classes = probs.shape[0]
    if num_classes < 2:
        raise ConfigError("cross-entropy needs the full class simplex (C >= 2)")
    validate_label_map(labels, num_classes, probs.shape[1:])
    n = labels.size
    flat_p = probs.reshape(num_classes, n)
    picked = np.maximum(flat_p[labels.reshape(-1), np.arange(n)], CE_CLAMP)
    value = float(-np.log(picked).mean())
    grad = np.zeros_like(flat_p)
    grad[labels.reshape(-1), np.arange(n)] = -1.0 / (n * picked)
    return LossOutput(value, grad.reshape(probs.shape))


def ce_loss_from_logits(logits: np.ndarray, labels: np.ndarray) -> LossOutput:
    """Fused softmax + cross-entropy; gradient wrt logits is (p - onehot)/N."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    num_classes = logits.shape[0]
    if num_classes < 2:
        raise ConfigError("cross-entropy needs the full class simplex (C >= 2)")
    validate_label_map(labels, num_classes, logits.shape[1:])
    n = labels.size
    shifted = logits - logits.max(axis=0, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=0, keepdims=True))
    log_p = shifted - log_z
    flat_lp = log_p.reshape(num_classes, n)
    value = float(-flat_lp[labels.reshape(-1), np.arange(n)].mean())
    grad = (np.exp(log_p) - _onehot(labels, num_classes)) / n
    return LossOutput(value, grad)


def soft_dice_loss(probs: np.ndarray, labels: np.ndarray, eps: float = 1e-5,
                   include_background: bool = True) -> LossOutput:
    """Soft Dice loss, symmetric eps smoothing, averaged over class channels.

    Per class: 1 - (2*sum(p*y) + eps) / (sum(p) + sum(y) + eps).
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    num_classes = probs.shape[0]
    validate_label_map(labels, num_classes, probs.shape[1:])
    onehot = _onehot(labels, num_classes)
    axes = tuple(range(1, probs.ndim))
    inter = (probs * onehot).sum(axis=axes)
    p_sum = probs.sum(axis=axes)
    y_sum = onehot.sum(axis=axes)
    num = 2.0 * inter + eps
    den = p_sum + y_sum + eps
    per_class = 1.0 - num / den

    if include_background or num_classes == 1:
        active = np.ones(num_classes, dtype=bool)
    else:
        active = np.arange(num_classes) >= 1
    n_active = int(active.sum())
    value = float(per_class[active].mean())

    # quotient rule: d/dp_i [num/den] = (2*y_i*den - num) / den^2
    shape = (num_classes,) + (1,) * (probs.ndim - 1)
    den_b = den.reshape(shape)
    num_b = num.reshape(shape)
    grad = -(2.0 * onehot * den_b - num_b) / (den_b ** 2) / n_active
    grad[~active] = 0.0
    return LossOutput(value, grad)


def dice_score(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-class hard Dice: argmax prediction, 2|P∩G|/(|P|+|G|).

    A class absent from both prediction and ground truth scores 1.0.
    """
    probs = np.asarray(probs)
    labels = np.asarray(labels)
    num_classes = probs.shape[0]
    if num_classes == 1:
        pred = (probs[0] >= 0.5).astype(np.int64)
    else:
        pred = probs.argmax(axis=0)
    scores = np.empty(num_classes)
    for c in range(num_classes):
        if num_classes == 1:
            p, g = pred != 0, labels != 0
        else:
            p, g = pred == c, labels == c
        denom = p.sum() + g.sum()
        scores[c] = 1.0 if denom == 0 else 2.0 * np.logical_and(p, g).sum() / denom
    return scores


def combined_loss(spec: LossSpec, probs: np.ndarray, labels: np.ndarray,
                  cfg: BinConfig, check_sum: bool = False) -> LossOutput:
    """Weighted sum of the spec's terms; gradient adds by linearity."""
    value = 0.0
    grad = np.zeros(np.asarray(probs).shape, dtype=np.float64)
    for name, weight in spec.terms:
        if name == "ce":
            out = ce_loss(probs, labels)
        elif name == "dice":
            out = soft_dice_loss(probs, labels)
        elif name in _CALIB_TERMS:
            out = _CALIB_TERMS[name](probs, labels, cfg, check_sum=check_sum)
        else:  # unreachable: LossSpec validates names
            raise ConfigError(f"unknown loss term {name!r}")
        value += weight * out.value
        grad += weight * out.grad_probs
    return LossOutput(value, grad)
