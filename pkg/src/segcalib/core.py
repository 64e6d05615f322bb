"""Hard binning of predicted probabilities and per-bin accumulation.

Probability maps are arrays of shape ``(C, *spatial)`` with one channel per
class; label maps are integer arrays of shape ``(*spatial)``. Each class
channel is treated as an independent binary (marginal) problem: every voxel
populates every class channel, regardless of whether that class occurs in
the image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputDomainError, ShapeError


@dataclass(frozen=True)
class BinConfig:
    """Uniform partition of [0, 1] into ``num_bins`` half-open intervals.

    Bin m covers [m/M, (m+1)/M); the final bin is closed at 1.0, so every
    probability lands in exactly one bin.
    """

    num_bins: int = 20

    def __post_init__(self):
        if self.num_bins < 2:
            raise ConfigError(f"num_bins must be >= 2, got {self.num_bins}")

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.num_bins + 1)


def assign_bin(p, cfg: BinConfig):
    """Map probabilities to bin indices: floor(p * M), clamped to M-1 at p = 1.

    Accepts a scalar or an array; returns the same shape with integer dtype.
    Raises InputDomainError for non-finite values or values outside [0, 1].
    """
    arr = np.asarray(p, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InputDomainError("probabilities must be finite")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise InputDomainError(
            f"probabilities must lie in [0, 1]; range is "
            f"[{arr.min()}, {arr.max()}]"
        )
    idx = np.minimum((arr * cfg.num_bins).astype(np.int64), cfg.num_bins - 1)
    if np.isscalar(p) or np.ndim(p) == 0:
        return int(idx)
    return idx


def validate_probability_map(probs: np.ndarray, check_sum: bool = True,
                             tol: float = 1e-5) -> None:
    """Check the probability-map invariants: finite, in [0,1], channels sum to 1.

    The channel-sum check only applies for C >= 2 (a single marginal channel
    carries no complement) and can be disabled for raw per-channel inputs.
    """
    if probs.ndim < 2:
        raise ShapeError(
            f"probability map needs a leading class axis, got shape {probs.shape}"
        )
    if not np.all(np.isfinite(probs)):
        raise InputDomainError("probability map contains non-finite values")
    if probs.size and (probs.min() < 0.0 or probs.max() > 1.0):
        raise InputDomainError("probability map values must lie in [0, 1]")
    if check_sum and probs.shape[0] >= 2:
        sums = probs.sum(axis=0)
        if sums.size and np.abs(sums - 1.0).max() > tol:
            raise InputDomainError(
                f"per-voxel class probabilities must sum to 1 within {tol}; "
                f"worst deviation {np.abs(sums - 1.0).max():.3g}"
            )


def validate_label_map(labels: np.ndarray, num_classes: int,
                       spatial_shape: tuple) -> None:
    if tuple(labels.shape) != tuple(spatial_shape):
        raise ShapeError(
            f"label shape {labels.shape} does not match spatial shape "
            f"{tuple(spatial_shape)}"
        )
    if not np.issubdtype(labels.dtype, np.integer):
        raise ShapeError(f"labels must be integers, got dtype {labels.dtype}")
    # a single-channel map is a marginal foreground problem: labels are the
    # binary indicator for that channel rather than class indices
    upper = 2 if num_classes == 1 else num_classes
    if labels.size and (labels.min() < 0 or labels.max() >= upper):
        raise InputDomainError(
            f"labels must lie in [0, {upper}); range is "
            f"[{labels.min()}, {labels.max()}]"
        )


def class_indicator(labels: np.ndarray, class_id: int,
                    num_classes: int) -> np.ndarray:
    """Boolean one-hot view for one class channel (virtual, never stored)."""
    if num_classes == 1:
        return labels != 0
    return labels == class_id


@dataclass
class CalibrationReport:
    """Per-class, per-bin accumulators: voxel count, sum of p, sum of one-hot y.

    Sums are kept exact (not running means) so reports merge associatively.
    All accumulation happens in float64 regardless of the input precision.
    """

    counts: np.ndarray      # (C, M) int64
    sum_prob: np.ndarray    # (C, M) float64
    sum_label: np.ndarray   # (C, M) int64
    total_voxels: int

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def num_bins(self) -> int:
        return self.counts.shape[1]

    def nonempty(self) -> np.ndarray:
        """(C, M) boolean mask of bins that hold at least one voxel."""
        return self.counts > 0

    def observed(self) -> np.ndarray:
        """o per (class, bin): fraction of bin members whose label is the class.

        Empty bins are reported as 0; mask with :meth:`nonempty` before use.
        """
        with np.errstate(invalid="ignore", divide="ignore"):
            o = np.where(self.counts > 0, self.sum_label / np.maximum(self.counts, 1), 0.0)
        return o

    def expected(self) -> np.ndarray:
        """e per (class, bin): mean predicted probability of bin members."""
        with np.errstate(invalid="ignore", divide="ignore"):
            e = np.where(self.counts > 0, self.sum_prob / np.maximum(self.counts, 1), 0.0)
        return e


def empty_report(num_classes: int, cfg: BinConfig) -> CalibrationReport:
    shape = (num_classes, cfg.num_bins)
    return CalibrationReport(
        counts=np.zeros(shape, dtype=np.int64),
        sum_prob=np.zeros(shape, dtype=np.float64),
        sum_label=np.zeros(shape, dtype=np.int64),
        total_voxels=0,
    )


def build_report(probs: np.ndarray, labels: np.ndarray, cfg: BinConfig,
                 check_sum: bool = False,
                 chunk_voxels: int | None = None) -> CalibrationReport:
    """Single streaming pass over all voxels, accumulating per-(class, bin) stats.

    ``chunk_voxels`` splits the voxel axis into partial accumulators that are
    merged with :func:`merge_reports`; the result is identical to one pass.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    validate_probability_map(probs, check_sum=check_sum)
    num_classes = probs.shape[0]
    validate_label_map(labels, num_classes, probs.shape[1:])
    n_voxels = int(np.prod(probs.shape[1:], dtype=np.int64))
    if n_voxels == 0:
        raise ShapeError("cannot build a report over an empty voxel region")

    flat_p = probs.reshape(num_classes, n_voxels)
    flat_y = labels.reshape(n_voxels)

    if chunk_voxels is not None and chunk_voxels < n_voxels:
        report = empty_report(num_classes, cfg)
        for start in range(0, n_voxels, chunk_voxels):
            sl = slice(start, min(start + chunk_voxels, n_voxels))
            report = merge_reports(
                report, _accumulate(flat_p[:, sl], flat_y[sl], cfg)
            )
        return report
    return _accumulate(flat_p, flat_y, cfg)


def _accumulate(flat_p: np.ndarray, flat_y: np.ndarray,
                cfg: BinConfig) -> CalibrationReport:
    num_classes, n = flat_p.shape
    m = cfg.num_bins
    counts = np.empty((num_classes, m), dtype=np.int64)
    sum_prob = np.empty((num_classes, m), dtype=np.float64)
    sum_label = np.empty((num_classes, m), dtype=np.int64)
    for c in range(num_classes):
        bins = assign_bin(flat_p[c], cfg)
        onehot = class_indicator(flat_y, c, num_classes)
        # canonical (bin, value) summation order makes the float sums, and
        # hence all metrics, invariant to voxel permutation
        order = np.lexsort((flat_p[c], bins))
        bins_sorted = bins[order]
        probs_sorted = flat_p[c][order]
        counts[c] = np.bincount(bins_sorted, minlength=m)
        sum_prob[c] = np.bincount(bins_sorted, weights=probs_sorted, minlength=m)
        sum_label[c] = np.bincount(bins[onehot], minlength=m)
    return CalibrationReport(counts, sum_prob, sum_label, total_voxels=n)


def merge_reports(a: CalibrationReport, b: CalibrationReport) -> CalibrationReport:
    """Component-wise sum of two reports; associative and commutative."""
    if a.counts.shape != b.counts.shape:
        raise ShapeError(
            f"cannot merge reports with shapes {a.counts.shape} and "
            f"{b.counts.shape} (C or M mismatch)"
        )
    return CalibrationReport(
        counts=a.counts + b.counts,
        sum_prob=a.sum_prob + b.sum_prob,
        sum_label=a.sum_label + b.sum_label,
        total_voxels=a.total_voxels + b.total_voxels,
    )
