"""Thin bindings over segcalib for autodiff-based training stacks.

``py_ace_loss`` and ``py_build_report`` call straight into the core package,
so their outputs are numerically identical to it; the only work done here is
array-interface coercion (zero-copy when the input is already a contiguous
float64/int64 buffer). The torch wrapper lives in
:mod:`segcalib_bindings.torch_ops` and is imported lazily so this package
works without torch installed.
"""

from __future__ import annotations

import numpy as np

from segcalib import BinConfig, __version__ as _core_version
from segcalib.calib_loss import ace_loss as _core_ace_loss
from segcalib.core import build_report as _core_build_report
from segcalib.errors import ShapeError

__version__ = _core_version

__all__ = ["py_ace_loss", "py_build_report", "__version__"]


def _as_probs(probs) -> np.ndarray:
    arr = np.asarray(probs)
    if arr.ndim < 2:
        raise ShapeError(
            f"probs: expected (num_classes, *spatial), got shape {arr.shape}"
        )
    return np.ascontiguousarray(arr, dtype=np.float64)


def _as_labels(labels) -> np.ndarray:
    arr = np.asarray(labels)
    if not np.issubdtype(arr.dtype, np.integer):
        raise ShapeError(f"labels: expected an integer array, got {arr.dtype}")
    return np.ascontiguousarray(arr, dtype=np.int64)


def py_ace_loss(probs, labels, bins: int = 20):
    """mL1-ACE loss value and its gradient with respect to ``probs``.

    Accepts anything with the numpy array interface. Returns
    ``(value, grad)`` where ``grad`` has the shape of ``probs``. The
    gradient is with respect to probabilities only; chaining through softmax
    belongs to the host framework's graph.
    """
    out = _core_ace_loss(_as_probs(probs), _as_labels(labels), BinConfig(bins))
    return out.value, out.grad_probs


def py_build_report(probs, labels, bins: int = 20) -> dict:
    """Per-class per-bin calibration statistics as a plain dictionary.

    Keys: ``counts`` (C, M) int64, ``observed`` / ``expected`` (C, M)
    float64 (zero where ``nonempty`` is false), ``nonempty`` (C, M) bool,
    plus ``num_classes``, ``num_bins`` and ``total_voxels``.
    """
    report = _core_build_report(_as_probs(probs), _as_labels(labels),
                                BinConfig(bins))
    return {
        "counts": report.counts,
        "observed": report.observed(),
        "expected": report.expected(),
        "nonempty": report.nonempty(),
        "num_classes": report.counts.shape[0],
        "num_bins": report.counts.shape[1],
        "total_voxels": report.total_voxels,
    }
