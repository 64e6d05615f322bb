"""Calibration errors as losses: forward value plus exact analytic gradient.

Hard binning is differentiable almost everywhere: holding each voxel's bin
membership fixed (valid away from the measure-zero bin edges), the loss is
piecewise linear in the predicted probabilities. The observed frequency o
depends only on the labels, so the gradient flows through e alone:

    ACE:  dL/dp_i = -sign(o - e) / (C * M'_c * n)   for voxel i in bin (c, m)
    ECE:  dL/dp_i = -sign(o - e) / (C * N)
    MCE:  dL/dp_i = -sign(o - e) / (C * n)          only in the argmax-gap bin

with sign(0) := 0 (minimum-norm subgradient at the L1 kink) and M'_c the
number of non-empty bins for class c.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    BinConfig,
    CalibrationReport,
    assign_bin,
    build_report,
)
from .errors import InputDomainError
from .metrics import ml1_ace, ml1_ece, ml1_mce


@dataclass
class LossCache:
    """Per-voxel bin membership and per-bin gap signs frozen at forward time."""

    bin_index: np.ndarray   # (C, N) int64
    gap_sign: np.ndarray    # (C, M) in {-1, 0, +1}
    report: CalibrationReport


@dataclass
class LossOutput:
    value: float
    grad_probs: np.ndarray  # same shape as the input probability map
    cache: LossCache | None = None


def _binned_forward(probs, labels, cfg, check_sum):
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    report = build_report(probs, labels, cfg, check_sum=check_sum)
    num_classes = probs.shape[0]
    n = report.total_voxels
    flat_p = probs.reshape(num_classes, n)
    bin_index = np.stack([assign_bin(flat_p[c], cfg) for c in range(num_classes)])
    gap = report.observed() - report.expected()
    gap[~report.nonempty()] = 0.0
    sign = np.sign(gap)
    return probs, report, bin_index, sign


def ace_loss(probs: np.ndarray, labels: np.ndarray, cfg: BinConfig,
             check_sum: bool = False) -> LossOutput:
    """mL1-ACE with its analytic gradient with respect to the probabilities."""
    probs, report, bin_index, sign = _binned_forward(probs, labels, cfg, check_sum)
    num_classes = report.num_classes
    value = float(ml1_ace(report).mean())
    m_prime = report.nonempty().sum(axis=1)  # (C,)
    # per-bin gradient, broadcast to every member of the bin
    safe_n = np.maximum(report.counts, 1)
    per_bin = -sign / (num_classes * m_prime[:, None] * safe_n)
    grad = np.take_along_axis(per_bin, bin_index, axis=1).reshape(probs.shape)
    return LossOutput(value, grad, LossCache(bin_index, sign, report))


def ece_loss(probs: np.ndarray, labels: np.ndarray, cfg: BinConfig,
             check_sum: bool = False) -> LossOutput:
    """mL1-ECE as a loss; the n/N bin weight cancels the within-bin mean."""
    probs, report, bin_index, sign = _binned_forward(probs, labels, cfg, check_sum)
    num_classes = report.num_classes
    value = float(ml1_ece(report).mean())
    per_bin = -sign / (num_classes * report.total_voxels)
    grad = np.take_along_axis(per_bin, bin_index, axis=1).reshape(probs.shape)
    return LossOutput(value, grad, LossCache(bin_index, sign, report))


def mce_loss(probs: np.ndarray, labels: np.ndarray, cfg: BinConfig,
             check_sum: bool = False) -> LossOutput:
    """mL1-MCE as a loss; only the per-class worst bin receives gradient.

    Argmax ties break toward the lowest bin index.
    """
    probs, report, bin_index, sign = _binned_forward(probs, labels, cfg, check_sum)
    num_classes = report.num_classes
    value = float(ml1_mce(report).mean())
    gaps = np.abs(report.observed() - report.expected())
    gaps[~report.nonempty()] = 0.0
    worst = gaps.argmax(axis=1)  # (C,), np.argmax takes the first maximum
    per_bin = np.zeros_like(gaps)
    rows = np.arange(num_classes)
    safe_n = np.maximum(report.counts[rows, worst], 1)
    per_bin[rows, worst] = -sign[rows, worst] / (num_classes * safe_n)
    grad = np.take_along_axis(per_bin, bin_index, axis=1).reshape(probs.shape)
    return LossOutput(value, grad, LossCache(bin_index, sign, report))


def softmax_with_grad(logits: np.ndarray):
    """Row-wise softmax over the class axis plus its backward map.

    Returns ``(probs, backward)`` where ``backward(grad_probs)`` gives the
    gradient with respect to the logits: p * (g - <g, p>) per voxel.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise InputDomainError("logits must be finite")
    shifted = logits - logits.max(axis=0, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=0, keepdims=True)

    def backward(grad_probs: np.ndarray) -> np.ndarray:
        inner = (grad_probs * probs).sum(axis=0, keepdims=True)
        return probs * (grad_probs - inner)

    return probs, backward
