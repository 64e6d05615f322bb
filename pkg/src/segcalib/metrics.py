"""Scalar calibration metrics derived from a CalibrationReport.

All three metrics reduce the per-(class, bin) gap |o - e| differently:
ECE weights each bin by its occupancy n/N, ACE averages gaps uniformly over
non-empty bins, MCE takes the worst gap per class. Empty bins have no
defined o or e and are excluded from the ACE average and the MCE max; a
strict variant keeping the full 1/M denominator is available for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CalibrationReport
from .errors import InputDomainError


@dataclass(frozen=True)
class CalibrationSummary:
    per_class_ece: np.ndarray
    per_class_ace: np.ndarray
    per_class_mce: np.ndarray
    mean_ece: float
    mean_ace: float
    mean_mce: float
    nonempty_bins_per_class: np.ndarray


def _gaps(report: CalibrationReport) -> tuple[np.ndarray, np.ndarray]:
    """(C, M) gap matrix |o - e| (0 in empty bins) and the non-empty mask."""
    mask = report.nonempty()
    gaps = np.abs(report.observed() - report.expected())
    gaps[~mask] = 0.0
    return gaps, mask


def _class_mean(per_class: np.ndarray, include_background: bool) -> float:
    if not include_background and per_class.shape[0] > 1:
        return float(per_class[1:].mean())
    return float(per_class.mean())


def ml1_ece(report: CalibrationReport) -> np.ndarray:
    """Per-class occupancy-weighted mean gap: sum_m (n_m/N) |o_m - e_m|."""
    if report.total_voxels <= 0:
        raise InputDomainError("report holds no voxels")
    gaps, _ = _gaps(report)
    return (report.counts / report.total_voxels * gaps).sum(axis=1)


def ml1_ace(report: CalibrationReport, empty_bins: str = "exclude") -> np.ndarray:
    """Per-class unweighted mean gap over bins.

    ``empty_bins="exclude"`` divides by the number of non-empty bins (the
    standard convention); ``"strict"`` divides by M with empty bins
    contributing zero.
    """
    if report.total_voxels <= 0:
        raise InputDomainError("report holds no voxels")
    gaps, mask = _gaps(report)
    if empty_bins == "exclude":
        denom = mask.sum(axis=1)
        return gaps.sum(axis=1) / denom
    if empty_bins == "strict":
        return gaps.sum(axis=1) / report.num_bins
    raise ValueError(f"empty_bins must be 'exclude' or 'strict', got {empty_bins!r}")


def ml1_mce(report: CalibrationReport) -> np.ndarray:
    """Per-class maximum gap over non-empty bins."""
    if report.total_voxels <= 0:
        raise InputDomainError("report holds no voxels")
    gaps, _ = _gaps(report)
    return gaps.max(axis=1)


def summarize(report: CalibrationReport, empty_bins: str = "exclude",
              include_background: bool = True) -> CalibrationSummary:
    """All three metrics per class plus unweighted class means.

    ``include_background=False`` drops class 0 from the means (the per-class
    vectors always cover every class).
    """
    ece = ml1_ece(report)
    ace = ml1_ace(report, empty_bins=empty_bins)
    mce = ml1_mce(report)
    return CalibrationSummary(
        per_class_ece=ece,
        per_class_ace=ace,
        per_class_mce=mce,
        mean_ece=_class_mean(ece, include_background),
        mean_ace=_class_mean(ace, include_background),
        mean_mce=_class_mean(mce, include_background),
        nonempty_bins_per_class=report.nonempty().sum(axis=1),
    )
