"""Deterministic SVG renderings of detection results: an overlaid score
histogram for the IN and OUT groups, and a ROC curve against the random
detector's diagonal.

No plotting library: the files are assembled as plain SVG text so output is
byte-identical across runs and platforms, and so tests can parse coordinates
back out. The data-to-pixel transform is fixed and invertible:

    x_px = MARGIN + x * (width  - 2 * MARGIN)
    y_px = height - MARGIN - y * (height - 2 * MARGIN)

for data coordinates in [0, 1] x [0, 1] (FPR/TPR for the ROC plot, bin
position/relative frequency for the histogram). ``to_pixel``/``from_pixel``
expose the transform; coordinates are written with 3 decimal places, so a
parsed round trip is exact to half a thousandth of a pixel.
"""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .detmetrics import DEFAULT_BINS, DetectionReport
from .errors import ValidationError

MARGIN = 50.0
HIST_SIZE = (640, 400)
ROC_SIZE = (480, 480)
IN_COLOR = "#3572b0"
OUT_COLOR = "#d0481f"

Point = tuple[float, float]


def to_pixel(point: Point, width: float, height: float) -> Point:
    """Map a data point in the unit square to pixel coordinates."""
    x, y = point
    return (
        MARGIN + x * (width - 2 * MARGIN),
        height - MARGIN - y * (height - 2 * MARGIN),
    )


def from_pixel(point: Point, width: float, height: float) -> Point:
    """Invert ``to_pixel``."""
    px, py = point
    return (
        (px - MARGIN) / (width - 2 * MARGIN),
        (height - MARGIN - py) / (height - 2 * MARGIN),
    )


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def _points_attr(points: Sequence[Point], width: float, height: float) -> str:
    pixels = (to_pixel(p, width, height) for p in points)
    return " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pixels)


def _svg_open(width: float, height: float) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}"'
        f' height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect x="0" y="0" width="{width:.0f}" height="{height:.0f}"'
        ' fill="white"/>',
    ]


def _axes(width: float, height: float, x_label: str, y_label: str) -> list[str]:
    (x0, y0) = to_pixel((0.0, 0.0), width, height)
    (x1, y1) = to_pixel((1.0, 1.0), width, height)
    mid_x = (x0 + x1) / 2
    mid_y = (y0 + y1) / 2
    return [
        f'<rect x="{_fmt(x0)}" y="{_fmt(y1)}" width="{_fmt(x1 - x0)}"'
        f' height="{_fmt(y0 - y1)}" fill="none" stroke="#888888"/>',
        f'<text x="{_fmt(mid_x)}" y="{_fmt(y0 + 32)}" font-size="13"'
        f' font-family="sans-serif" text-anchor="middle">{escape(x_label)}</text>',
        f'<text x="{_fmt(x0 - 36)}" y="{_fmt(mid_y)}" font-size="13"'
        f' font-family="sans-serif" text-anchor="middle"'
        f' transform="rotate(-90 {_fmt(x0 - 36)} {_fmt(mid_y)})">'
        f"{escape(y_label)}</text>",
    ]


def _title(text: str, width: float) -> str:
    return (
        f'<text x="{_fmt(width / 2)}" y="24" font-size="15"'
        f' font-family="sans-serif" text-anchor="middle">{escape(text)}</text>'
    )


def score_histogram_svg(
    in_scores: Sequence[float],
    out_scores: Sequence[float],
    bins: int = DEFAULT_BINS,
    title: str = "",
) -> str:
    """Overlay of the two groups' score histograms, each normalized to
    relative frequency (bar heights within a group sum to 1), over shared
    equal-width bins spanning the pooled score range.
    """
    ins = np.asarray(in_scores, dtype=np.float64)
    outs = np.asarray(out_scores, dtype=np.float64)
    if ins.size == 0 or outs.size == 0:
        raise ValidationError("both score groups must be non-empty")
    if not (np.isfinite(ins).all() and np.isfinite(outs).all()):
        raise ValidationError("scores must be finite")
    if bins < 1:
        raise ValidationError(f"bins must be >= 1, got {bins}")

    lo = float(min(ins.min(), outs.min()))
    hi = float(max(ins.max(), outs.max()))
    if lo == hi:
        lo -= 0.5
        hi += 0.5
    in_freq = np.histogram(ins, bins=bins, range=(lo, hi))[0] / ins.size
    out_freq = np.histogram(outs, bins=bins, range=(lo, hi))[0] / outs.size
    top = float(max(in_freq.max(), out_freq.max()))

    width, height = HIST_SIZE
    parts = _svg_open(width, height)
    if title:
        parts.append(_title(title, width))
    parts.extend(_axes(width, height, "score", "relative frequency"))
    for freq, color, name in ((in_freq, IN_COLOR, "in"), (out_freq, OUT_COLOR, "out")):
        for b, f in enumerate(freq):
            if f == 0.0:
                continue
            x_left, y_base = to_pixel((b / bins, 0.0), width, height)
            x_right, y_top = to_pixel(((b + 1) / bins, float(f) / top), width, height)
            parts.append(
                f'<rect class="{name}" x="{_fmt(x_left)}" y="{_fmt(y_top)}"'
                f' width="{_fmt(x_right - x_left)}"'
                f' height="{_fmt(y_base - y_top)}"'
                f' fill="{color}" fill-opacity="0.55"/>'
            )
    x0, y0 = to_pixel((0.0, 0.0), width, height)
    x1, _ = to_pixel((1.0, 0.0), width, height)
    for x, anchor, value in ((x0, "start", lo), (x1, "end", hi)):
        parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y0 + 16)}" font-size="11"'
            f' font-family="sans-serif" text-anchor="{anchor}">{value:.4g}</text>'
        )
    legend_y = MARGIN / 2
    parts.append(
        f'<rect x="{_fmt(width - 170)}" y="{_fmt(legend_y)}" width="12"'
        f' height="12" fill="{IN_COLOR}" fill-opacity="0.55"/>'
        f'<text x="{_fmt(width - 154)}" y="{_fmt(legend_y + 11)}" font-size="12"'
        f' font-family="sans-serif">in (n={ins.size})</text>'
        f'<rect x="{_fmt(width - 90)}" y="{_fmt(legend_y)}" width="12"'
        f' height="12" fill="{OUT_COLOR}" fill-opacity="0.55"/>'
        f'<text x="{_fmt(width - 74)}" y="{_fmt(legend_y + 11)}" font-size="12"'
        f' font-family="sans-serif">out (n={outs.size})</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def roc_svg(
    roc_points: Sequence[Point],
    title: str = "",
) -> str:
    """ROC polyline over the random detector's diagonal.

    ``roc_points`` are (FPR, TPR) pairs as produced by ``roc_curve``; the
    polyline visits them in the given order. Requires at least two points.
    """
    pts = [(float(x), float(y)) for x, y in roc_points]
    if len(pts) < 2:
        raise ValidationError(f"need >= 2 roc points, got {len(pts)}")
    for x, y in pts:
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValidationError("roc points must be finite")
        if not (-1e-9 <= x <= 1 + 1e-9 and -1e-9 <= y <= 1 + 1e-9):
            raise ValidationError(f"roc point ({x}, {y}) outside the unit square")

    width, height = ROC_SIZE
    parts = _svg_open(width, height)
    if title:
        parts.append(_title(title, width))
    parts.extend(_axes(width, height, "false positive rate", "true positive rate"))
    d0 = to_pixel((0.0, 0.0), width, height)
    d1 = to_pixel((1.0, 1.0), width, height)
    parts.append(
        f'<line class="diagonal" x1="{_fmt(d0[0])}" y1="{_fmt(d0[1])}"'
        f' x2="{_fmt(d1[0])}" y2="{_fmt(d1[1])}" stroke="#aaaaaa"'
        ' stroke-dasharray="6,4"/>'
    )
    parts.append(
        f'<polyline class="roc" points="{_points_attr(pts, width, height)}"'
        f' fill="none" stroke="{IN_COLOR}" stroke-width="2"/>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_plots(report: DetectionReport, in_scores: Sequence[float],
                 out_scores: Sequence[float]) -> dict[str, str]:
    """Both figures for one comparison, keyed by figure kind."""
    label = report.name or "scores"
    return {
        "hist": score_histogram_svg(
            in_scores,
            out_scores,
            bins=report.bins,
            title=f"{label}: score histograms",
        ),
        "roc": roc_svg(
            report.roc_points,
            title=f"{label}: ROC (AUROC={report.auroc:.3f})",
        ),
    }
