"""Post-hoc temperature scaling fitted by golden-section search on log T."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calib_loss import softmax_with_grad
from .errors import InputDomainError
from .seg_losses import ce_loss_from_logits

LOG_T_RANGE = (-3.0, 3.0)
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class TemperatureFit:
    temperature: float
    final_nll: float
    iterations: int
    degenerate_labels: bool = False


def apply_temperature(logits: np.ndarray, temperature: float) -> np.ndarray:
    """softmax(logits / T); T = 1 is plain softmax. Argmax is unchanged."""
    if not (temperature > 0):
        raise InputDomainError(f"temperature must be > 0, got {temperature}")
    probs, _ = softmax_with_grad(np.asarray(logits, dtype=np.float64) / temperature)
    return probs


def fit_temperature(logits: np.ndarray, labels: np.ndarray,
                    max_voxels: int = 1_000_000, seed: int = 0,
                    tol: float = 1e-4) -> TemperatureFit:
    """Minimize mean cross-entropy of softmax(logits/T) over log T in [-3, 3].

    Golden-section search, tolerance 1e-4 in log T, deterministic. Inputs
    larger than ``max_voxels`` are subsampled with the given seed. A label
    map containing a single class still fits but is flagged as weakly
    identifying T.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if not np.all(np.isfinite(logits)):
        raise InputDomainError("logits must be finite")
    num_classes = logits.shape[0]
    n = labels.size
    if n < 1:
        raise InputDomainError("need at least one voxel to fit a temperature")

    flat_logits = logits.reshape(num_classes, n)
    flat_labels = labels.reshape(n)
    if n > max_voxels:
        rng = np.random.default_rng(seed)
        keep = rng.choice(n, size=max_voxels, replace=False)
        keep.sort()
        flat_logits = flat_logits[:, keep]
        flat_labels = flat_labels[keep]

    degenerate = np.unique(flat_labels).size < 2

    def nll(log_t: float) -> float:
        return ce_loss_from_logits(flat_logits / np.exp(log_t), flat_labels).value

    lo, hi = LOG_T_RANGE
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = nll(x1), nll(x2)
    iterations = 0
    while hi - lo > tol:
        iterations += 1
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = nll(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = nll(x2)
    log_t = 0.5 * (lo + hi)
    best_nll = nll(log_t)
    # never do worse than the uncalibrated baseline T = 1
    baseline = nll(0.0)
    if baseline < best_nll:
        log_t, best_nll = 0.0, baseline
    return TemperatureFit(
        temperature=float(np.exp(log_t)),
        final_nll=float(best_nll),
        iterations=iterations,
        degenerate_labels=bool(degenerate),
    )
