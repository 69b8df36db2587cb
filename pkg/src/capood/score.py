"""Turning scored captions into detection scores.

The detection score of a caption is the sum of its token log-probabilities
(the model's log-likelihood of its own output); higher means more
in-distribution. A length-normalized mean is available as config. The
max-softmax baseline scores a sample by the maximum classifier posterior.
Thresholding declares IN at or above the threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal, Mapping, Sequence

from .errors import DegenerateCaptionError, ValidationError
from .records import (
    POS_TAGS,
    ClassProbRecord,
    Label,
    PosLexicon,
    SampleScore,
    ScoredCaption,
    Vocabulary,
)


@dataclass(frozen=True)
class ScoreConfig:
    """How a caption's token records collapse to one number.

    ``normalization``: "sum" (default, the likelihood score) or "mean".
    ``include_eos``: whether a terminated caption's end-token record
    participates; it carries the model's stop confidence and is included by
    default.
    """

    normalization: Literal["sum", "mean"] = "sum"
    include_eos: bool = True

    def __post_init__(self):
        if self.normalization not in ("sum", "mean"):
            raise ValidationError(
                f"normalization must be 'sum' or 'mean', got {self.normalization!r}"
            )


def caption_score(caption: ScoredCaption, config: ScoreConfig = ScoreConfig()) -> float:
    """Collapse one caption to its detection score.

    Raises ``DegenerateCaptionError`` when no records remain (an empty
    caption, or a bare end token with ``include_eos=False``); a silent 0.0
    would score as the best possible caption.
    """
    records = caption.tokens if config.include_eos else caption.body()
    if not records:
        raise DegenerateCaptionError(
            f"sample {caption.sample_id!r}: no scorable token records"
            f" (include_eos={config.include_eos})"
        )
    total = math.fsum(rec.logprob for rec in records)
    if config.normalization == "mean":
        return total / len(records)
    return total


def score_captions(
    captions: Iterable[ScoredCaption],
    label: Label,
    config: ScoreConfig = ScoreConfig(),
) -> list[SampleScore]:
    """Score every caption and attach the given ground-truth group label."""
    return [
        SampleScore(cap.sample_id, cap.set_id, caption_score(cap, config), label)
        for cap in captions
    ]


def msp_score(record: ClassProbRecord) -> float:
    """Max-softmax baseline: the classifier's top posterior probability."""
    return max(record.probs)


def msp_scores(
    records: Iterable[ClassProbRecord], set_id: str, label: Label
) -> list[SampleScore]:
    return [SampleScore(rec.sample_id, set_id, msp_score(rec), label) for rec in records]


@dataclass(frozen=True)
class ThresholdReport:
    """Decisions and confusion counts for one threshold, IN as positive.

    Rates are NaN when their denominator is zero (a group absent from the
    input), never silently 0.
    """

    threshold: float
    decisions: tuple[tuple[str, str], ...]  # (sample_id, "IN"|"OUT")
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def tpr(self) -> float:
        return self.tp / (self.tp + self.fn) if (self.tp + self.fn) else math.nan

    @property
    def fpr(self) -> float:
        return self.fp / (self.fp + self.tn) if (self.fp + self.tn) else math.nan

    @property
    def tnr(self) -> float:
        return self.tn / (self.fp + self.tn) if (self.fp + self.tn) else math.nan

    @property
    def fnr(self) -> float:
        return self.fn / (self.tp + self.fn) if (self.tp + self.fn) else math.nan

    def to_json(self) -> dict:
        return {
            "threshold": self.threshold,
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
            "tpr": self.tpr,
            "fpr": self.fpr,
            "tnr": self.tnr,
            "fnr": self.fnr,
        }


def apply_threshold(scores: Sequence[SampleScore], threshold: float) -> ThresholdReport:
    """Declare IN at score >= threshold; tally against ground-truth labels."""
    if not math.isfinite(threshold):
        raise ValidationError(f"threshold must be finite, got {threshold!r}")
    decisions = []
    tp = fp = tn = fn = 0
    for s in scores:
        decision = "IN" if s.score >= threshold else "OUT"
        decisions.append((s.sample_id, decision))
        if s.label == "IN":
            if decision == "IN":
                tp += 1
            else:
                fn += 1
        else:
            if decision == "IN":
                fp += 1
            else:
                tn += 1
    return ThresholdReport(threshold, tuple(decisions), tp, fp, tn, fn)


@dataclass(frozen=True)
class PosProfile:
    """Mean token probability (exp of logprob) per part-of-speech tag.

    Tags with no tokens report count 0 and NaN mean. ``per_caption`` mode
    averages within each caption first, then across captions that contain
    the tag.
    """

    means: Mapping[str, float]
    counts: Mapping[str, int]

    def mean(self, tag: str) -> float:
        return self.means[tag]


def pos_profile(
    captions: Iterable[ScoredCaption],
    vocab: Vocabulary,
    lexicon: PosLexicon | None = None,
    *,
    per_caption: bool = False,
) -> PosProfile:
    """Profile body-token probabilities by POS tag.

    A record's inline ``pos`` wins; otherwise the lexicon tags the token
    string; with no lexicon untagged records count as OTHER. End-token
    records are excluded (they have no part of speech).
    """
    pooled: dict[str, list[float]] = {tag: [] for tag in POS_TAGS}
    per_cap_means: dict[str, list[float]] = {tag: [] for tag in POS_TAGS}
    counts: dict[str, int] = {tag: 0 for tag in POS_TAGS}

    for caption in captions:
        caption.validate_against(vocab)
        local: dict[str, list[float]] = {}
        for rec in caption.body():
            tag = rec.pos
            if tag is None:
                tag = lexicon.tag(vocab.token(rec.token_id)) if lexicon else "OTHER"
            prob = math.exp(rec.logprob)
            pooled[tag].append(prob)
            local.setdefault(tag, []).append(prob)
            counts[tag] += 1
        for tag, probs in local.items():
            per_cap_means[tag].append(math.fsum(probs) / len(probs))

    source = per_cap_means if per_caption else pooled
    means = {
        tag: (math.fsum(vals) / len(vals) if vals else math.nan)
        for tag, vals in source.items()
    }
    return PosProfile(means, counts)
