"""Threshold-free detection metrics over two score groups.

Convention throughout: IN-distribution samples should score *higher* than
OUT samples. AUROC is the Mann-Whitney statistic (ties get half credit),
computed with midranks. AUPR is average precision under the step convention
sum((R_k - R_{k-1}) * P_k) over descending distinct thresholds, and is
reported for both polarities: positive=IN sweeps scores as-is, positive=OUT
sweeps negated scores, since an OUT-detector fires on low likelihoods.
Bhattacharyya distance is -ln BC over equal-width histograms (default 50
bins) of the pooled score range.

Edge cases are pinned, not approximated: groups identical as multisets give
AUROC exactly 0.5 and BD exactly 0.0; a zero-width pooled range warns and
gives BD 0.0; histograms with no overlapping mass give BD infinity (the
perfect-detector limit); AUPR on a constant scorer equals the positive base
rate.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .records import SampleScore

logger = logging.getLogger(__name__)

DEFAULT_BINS = 50


def _as_scores(values: Sequence[float], side: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"{side} scores must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{side} scores contain non-finite values")
    return arr


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties averaged; exact for half-integer arithmetic."""
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    n = len(values)
    while i < n:
        j = i
        while j + 1 < n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * ((i + 1) + (j + 1))
        i = j + 1
    return ranks


def auroc(in_scores: Sequence[float], out_scores: Sequence[float]) -> float:
    """P(random IN scores above random OUT), ties counting half."""
    ins = _as_scores(in_scores, "in")
    outs = _as_scores(out_scores, "out")
    pooled = np.concatenate([ins, outs])
    ranks = _midranks(pooled)
    n_in, n_out = len(ins), len(outs)
    u = float(ranks[:n_in].sum()) - n_in * (n_in + 1) / 2.0
    return u / (n_in * n_out)


def roc_curve(
    in_scores: Sequence[float], out_scores: Sequence[float]
) -> tuple[tuple[float, float], ...]:
    """(FPR, TPR) operating points: (0,0) then one point per distinct pooled
    score threshold, descending, declaring IN at score >= threshold. The
    final point is always (1,1); trapezoidal area equals ``auroc``."""
    ins = np.sort(_as_scores(in_scores, "in"))
    outs = np.sort(_as_scores(out_scores, "out"))
    thresholds = np.unique(np.concatenate([ins, outs]))[::-1]
    n_in, n_out = len(ins), len(outs)
    points = [(0.0, 0.0)]
    for t in thresholds:
        tpr = (n_in - int(np.searchsorted(ins, t, side="left"))) / n_in
        fpr = (n_out - int(np.searchsorted(outs, t, side="left"))) / n_out
        points.append((fpr, tpr))
    return tuple(points)


def _average_precision(
    pos: np.ndarray, neg: np.ndarray
) -> tuple[float, tuple[tuple[float, float], ...]]:
    """AP and its (recall, precision) points, sweeping descending distinct
    thresholds; a whole tie group enters at once."""
    scores = np.concatenate([pos, neg])
    is_pos = np.concatenate([np.ones(len(pos), bool), np.zeros(len(neg), bool)])
    order = np.argsort(-scores, kind="mergesort")
    scores, is_pos = scores[order], is_pos[order]

    ap = 0.0
    prev_recall = 0.0
    points = []
    n_pos = int(is_pos.sum())
    tp = fp = 0
    i = 0
    n = len(scores)
    while i < n:
        j = i
        while j + 1 < n and scores[j + 1] == scores[i]:
            j += 1
        group = is_pos[i : j + 1]
        tp += int(group.sum())
        fp += int((~group).sum())
        precision = tp / (tp + fp)
        recall = tp / n_pos
        ap += (recall - prev_recall) * precision
        points.append((recall, precision))
        prev_recall = recall
        i = j + 1
    return ap, tuple(points)


def aupr(
    in_scores: Sequence[float],
    out_scores: Sequence[float],
    positive: str = "IN",
) -> float:
    """Average precision with the chosen group as positives.

    positive="IN" ranks by score descending; positive="OUT" ranks by score
    ascending (low likelihood means OUT), implemented by negating scores.
    """
    ap, _ = _aupr_points(in_scores, out_scores, positive)
    return ap


def _aupr_points(
    in_scores: Sequence[float], out_scores: Sequence[float], positive: str
) -> tuple[float, tuple[tuple[float, float], ...]]:
    ins = _as_scores(in_scores, "in")
    outs = _as_scores(out_scores, "out")
    if positive == "IN":
        return _average_precision(ins, outs)
    if positive == "OUT":
        return _average_precision(-outs, -ins)
    raise ValidationError(f"positive must be 'IN' or 'OUT', got {positive!r}")


def bhattacharyya(
    in_scores: Sequence[float],
    out_scores: Sequence[float],
    bins: int = DEFAULT_BINS,
) -> float:
    """-ln sum_b sqrt(p_b q_b) over equal-width histograms of the pooled range.

    Identical count profiles give exactly 0.0 (checked by integer
    cross-multiplication, immune to float drift); disjoint profiles give
    infinity; a degenerate zero-width range gives 0.0 with a warning, since
    one bin holds everything and the distributions are indistinguishable.
    """
    if bins < 1:
        raise ValidationError(f"bins must be >= 1, got {bins}")
    ins = _as_scores(in_scores, "in")
    outs = _as_scores(out_scores, "out")
    lo = float(min(ins.min(), outs.min()))
    hi = float(max(ins.max(), outs.max()))
    if lo == hi:
        logger.warning(
            "bhattacharyya: pooled score range is a single point (%r); distance is 0", lo
        )
        return 0.0
    cin, _ = np.histogram(ins, bins=bins, range=(lo, hi))
    cout, _ = np.histogram(outs, bins=bins, range=(lo, hi))
    n_in, n_out = len(ins), len(outs)
    if np.array_equal(cin * n_out, cout * n_in):
        return 0.0
    bc = float(np.sqrt(cin.astype(np.float64) * cout.astype(np.float64)).sum())
    bc /= math.sqrt(n_in * n_out)
    if bc <= 0.0:
        return math.inf
    return -math.log(min(bc, 1.0))


@dataclass(frozen=True)
class ScoreGroup:
    """The two score populations of one detection comparison."""

    in_scores: tuple[float, ...]
    out_scores: tuple[float, ...]

    @classmethod
    def from_samples(cls, samples: Sequence[SampleScore]) -> "ScoreGroup":
        ins = tuple(s.score for s in samples if s.label == "IN")
        outs = tuple(s.score for s in samples if s.label == "OUT")
        if not ins or not outs:
            raise ValidationError(
                f"need both labels to compare: got {len(ins)} IN and {len(outs)} OUT"
            )
        return cls(ins, outs)


@dataclass(frozen=True)
class DetectionReport:
    """All detection metrics for one IN-vs-OUT comparison."""

    name: str
    n_in: int
    n_out: int
    auroc: float
    aupr_in: float
    aupr_out: float
    bd: float
    bins: int
    roc_points: tuple[tuple[float, float], ...]
    pr_points: tuple[tuple[float, float], ...]

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "n_in": self.n_in,
            "n_out": self.n_out,
            "auroc": self.auroc,
            "aupr_in": self.aupr_in,
            "aupr_out": self.aupr_out,
            # JSON has no Infinity literal; the CSV and JSONL forms both
            # spell it "inf".
            "bd": self.bd if math.isfinite(self.bd) else "inf",
            "bins": self.bins,
            "roc_points": [list(p) for p in self.roc_points],
            "pr_points": [list(p) for p in self.pr_points],
        }


def detection_report(
    group: ScoreGroup, bins: int = DEFAULT_BINS, name: str = ""
) -> DetectionReport:
    ins, outs = group.in_scores, group.out_scores
    ap_in, pr_points = _aupr_points(ins, outs, "IN")
    ap_out, _ = _aupr_points(ins, outs, "OUT")
    return DetectionReport(
        name=name,
        n_in=len(ins),
        n_out=len(outs),
        auroc=auroc(ins, outs),
        aupr_in=ap_in,
        aupr_out=ap_out,
        bd=bhattacharyya(ins, outs, bins),
        bins=bins,
        roc_points=roc_curve(ins, outs),
        pr_points=pr_points,
    )
