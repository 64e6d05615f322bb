"""Reliability diagrams (per image) and dataset reliability histograms.

A reliability diagram extracts the per-bin (confidence, accuracy, count)
triples for one class of one report, without smoothing or interpolation.
A dataset reliability histogram is the M x K joint count matrix obtained by
binning each case's per-bin observed frequency: every (case, non-empty
confidence bin) pair contributes exactly one count, unweighted by bin
occupancy, so large images do not dominate.

Both structures have deterministic CSV and standalone SVG emitters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import BinConfig, CalibrationReport, assign_bin
from .errors import ShapeError


@dataclass(frozen=True)
class ReliabilityDiagram:
    class_id: int
    num_bins: int
    counts: np.ndarray       # (M,) int64
    confidence: np.ndarray   # (M,) e per bin; NaN where empty
    accuracy: np.ndarray     # (M,) o per bin; NaN where empty
    edges: np.ndarray        # (M+1,)


@dataclass(frozen=True)
class DatasetHistogram:
    class_id: int
    num_conf_bins: int
    num_freq_bins: int
    counts: np.ndarray       # (M, K) int64
    num_cases: int


def reliability_diagram(report: CalibrationReport, class_id: int) -> ReliabilityDiagram:
    """Extract (e, o, n) per bin for one class; empty bins carry NaN."""
    if not (0 <= class_id < report.num_classes):
        raise ShapeError(
            f"class {class_id} out of range for report with "
            f"{report.num_classes} classes"
        )
    mask = report.nonempty()[class_id]
    conf = np.where(mask, report.expected()[class_id], np.nan)
    acc = np.where(mask, report.observed()[class_id], np.nan)
    return ReliabilityDiagram(
        class_id=class_id,
        num_bins=report.num_bins,
        counts=report.counts[class_id].copy(),
        confidence=conf,
        accuracy=acc,
        edges=np.linspace(0.0, 1.0, report.num_bins + 1),
    )


def dataset_histogram(reports: Sequence[CalibrationReport], class_id: int,
                      freq_bins: int | None = None) -> DatasetHistogram:
    """Joint (confidence bin, empirical-frequency bin) counts across cases."""
    reports = list(reports)
    if not reports:
        raise ShapeError("need at least one report")
    m = reports[0].num_bins
    c = reports[0].num_classes
    if not (0 <= class_id < c):
        raise ShapeError(f"class {class_id} out of range for {c} classes")
    k = m if freq_bins is None else freq_bins
    freq_cfg = BinConfig(k)
    counts = np.zeros((m, k), dtype=np.int64)
    for rep in reports:
        if rep.num_bins != m or rep.num_classes != c:
            raise ShapeError(
                f"inconsistent report shape ({rep.num_classes}, {rep.num_bins}) "
                f"vs ({c}, {m})"
            )
        mask = rep.nonempty()[class_id]
        obs = rep.observed()[class_id]
        for conf_bin in np.flatnonzero(mask):
            counts[conf_bin, assign_bin(float(obs[conf_bin]), freq_cfg)] += 1
    return DatasetHistogram(
        class_id=class_id,
        num_conf_bins=m,
        num_freq_bins=k,
        counts=counts,
        num_cases=len(reports),
    )


def _fmt(x: float) -> str:
    """17-significant-digit decimal, enough to round-trip any float64."""
    return f"{x:.17g}"


def emit_csv(obj, path) -> None:
    """Write a diagram or histogram as a deterministic, byte-stable CSV."""
    if isinstance(obj, ReliabilityDiagram):
        lines = ["class,bin,lo,hi,count,confidence,accuracy"]
        for m in range(obj.num_bins):
            conf = "" if math.isnan(obj.confidence[m]) else _fmt(obj.confidence[m])
            acc = "" if math.isnan(obj.accuracy[m]) else _fmt(obj.accuracy[m])
            lines.append(
                f"{obj.class_id},{m},{_fmt(obj.edges[m])},{_fmt(obj.edges[m + 1])},"
                f"{obj.counts[m]},{conf},{acc}"
            )
    elif isinstance(obj, DatasetHistogram):
        lines = ["conf_bin,freq_bin,count"]
        for m in range(obj.num_conf_bins):
            for k in range(obj.num_freq_bins):
                if obj.counts[m, k]:
                    lines.append(f"{m},{k},{obj.counts[m, k]}")
    else:
        raise TypeError(f"cannot emit {type(obj).__name__} as CSV")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


# --- SVG rendering (dependency-free, deterministic) -------------------------

_W, _H = 480, 420
_MARGIN = 50
_PLOT_H = 260
_COUNT_H = 80


def _svg_header(title: str) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f"<title>{title}</title>",
    ]


def emit_svg(obj, path) -> None:
    """Write a standalone SVG 1.1 rendering (no external references).

    Diagrams render as accuracy bars against confidence bins with a diagonal
    reference line and a count sub-plot; histograms as an M x K heat grid
    with log-scaled shading.
    """
    if isinstance(obj, ReliabilityDiagram):
        svg = _diagram_svg(obj)
    elif isinstance(obj, DatasetHistogram):
        svg = _histogram_svg(obj)
    else:
        raise TypeError(f"cannot emit {type(obj).__name__} as SVG")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(svg)


def _diagram_svg(d: ReliabilityDiagram) -> str:
    x0, y0 = _MARGIN, 20
    plot_w = _W - 2 * _MARGIN
    lines = _svg_header(f"Reliability diagram, class {d.class_id}")
    lines.append(f'<rect x="{x0}" y="{y0}" width="{plot_w}" height="{_PLOT_H}" '
                 'fill="white" stroke="black"/>')
    bar_w = plot_w / d.num_bins
    for m in range(d.num_bins):
        if d.counts[m] == 0:
            continue
        h = d.accuracy[m] * _PLOT_H
        lines.append(
            f'<rect x="{x0 + m * bar_w:.2f}" y="{y0 + _PLOT_H - h:.2f}" '
            f'width="{bar_w:.2f}" height="{h:.2f}" '
            'fill="#4878a8" stroke="black" stroke-width="0.5"/>'
        )
    lines.append(
        f'<line id="diagonal" x1="{x0}" y1="{y0 + _PLOT_H}" '
        f'x2="{x0 + plot_w}" y2="{y0}" stroke="black" stroke-dasharray="4,3"/>'
    )
    # count sub-plot, log-scaled heights
    cy0 = y0 + _PLOT_H + 20
    max_count = int(d.counts.max())
    scale = math.log1p(max_count) if max_count else 1.0
    lines.append(f'<rect x="{x0}" y="{cy0}" width="{plot_w}" height="{_COUNT_H}" '
                 'fill="white" stroke="black"/>')
    for m in range(d.num_bins):
        if d.counts[m] == 0:
            continue
        h = math.log1p(int(d.counts[m])) / scale * _COUNT_H
        lines.append(
            f'<rect x="{x0 + m * bar_w:.2f}" y="{cy0 + _COUNT_H - h:.2f}" '
            f'width="{bar_w:.2f}" height="{h:.2f}" '
            'fill="#a8a8a8" stroke="black" stroke-width="0.5"/>'
        )
    lines.append(
        f'<text x="{_W / 2:.0f}" y="{_H - 6}" text-anchor="middle" '
        'font-size="12">Predicted Foreground Probability / Confidence</text>'
    )
    lines.append(
        f'<text x="14" y="{y0 + _PLOT_H / 2:.0f}" text-anchor="middle" '
        f'font-size="12" transform="rotate(-90 14 {y0 + _PLOT_H / 2:.0f})">'
        "Empirical Foreground Frequency / Accuracy</text>"
    )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _histogram_svg(h: DatasetHistogram) -> str:
    x0, y0 = _MARGIN, 20
    side = _W - 2 * _MARGIN
    lines = _svg_header(f"Dataset reliability histogram, class {h.class_id}")
    lines.append("<!-- color-scale: log -->")
    cell_w = side / h.num_conf_bins
    cell_h = side / h.num_freq_bins
    max_count = int(h.counts.max())
    scale = math.log1p(max_count) if max_count else 1.0
    lines.append(f'<rect x="{x0}" y="{y0}" width="{side}" height="{side:.2f}" '
                 'fill="white" stroke="black"/>')
    for m in range(h.num_conf_bins):
        for k in range(h.num_freq_bins):
            count = int(h.counts[m, k])
            if count == 0:
                continue
            t = math.log1p(count) / scale
            shade = int(round(255 * (1.0 - t)))
            lines.append(
                f'<rect x="{x0 + m * cell_w:.2f}" '
                f'y="{y0 + side - (k + 1) * cell_h:.2f}" '
                f'width="{cell_w:.2f}" height="{cell_h:.2f}" '
                f'fill="rgb({shade},{shade},255)"/>'
            )
    lines.append(
        f'<line id="diagonal" x1="{x0}" y1="{y0 + side:.2f}" '
        f'x2="{x0 + side}" y2="{y0}" stroke="black" stroke-dasharray="4,3"/>'
    )
    lines.append(
        f'<text x="{_W / 2:.0f}" y="{_H - 6}" text-anchor="middle" '
        'font-size="12">Predicted Foreground Probability / Confidence</text>'
    )
    lines.append(
        f'<text x="14" y="{y0 + side / 2:.0f}" text-anchor="middle" '
        f'font-size="12" transform="rotate(-90 14 {y0 + side / 2:.0f})">'
        "Empirical Foreground Frequency / Accuracy</text>"
    )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
