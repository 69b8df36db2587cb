"""Caption quality against reference sets: corpus BLEU-4 and ROUGE-L.

BLEU-4 is the corpus formulation: modified (clipped) n-gram precision
pooled over all samples for n = 1..4, uniform 1/4 weights in the geometric
mean, brevity penalty exp(1 - r/c) when the total candidate length c does
not exceed the total effective reference length r. Per sample, r counts the
reference length closest to the candidate's (ties to the shorter). Add-one
smoothing on the pooled numerator and denominator for n >= 2 is on by
default so a single zero n-gram count does not zero the corpus score.

ROUGE-L computes the LCS-based F-measure per candidate/reference pair,
F = (1 + beta^2) R P / (R + beta^2 P) with beta = 1.2, takes the max over a
sample's references, and averages over samples.

Both metrics accept empty candidates (they contribute zero n-grams / zero F)
but raise when a candidate has no reference entry.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from typing import Mapping, Sequence

from .errors import ValidationError

logger = logging.getLogger(__name__)

Tokens = Sequence[str]
ReferenceSet = Mapping[str, Sequence[Tokens]]

BLEU_MAX_N = 4
ROUGE_BETA = 1.2


def _check_refs(sample_id: str, refs: Sequence[Tokens]) -> None:
    if not refs or any(len(ref) == 0 for ref in refs):
        raise ValidationError(
            f"sample {sample_id!r} needs at least one non-empty reference"
        )


def _ngrams(tokens: Tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _closest_ref_length(cand_len: int, refs: Sequence[Tokens]) -> int:
    # Closest in absolute difference; ties break to the shorter reference.
    return min((abs(len(r) - cand_len), len(r)) for r in refs)[1]


def bleu4(
    candidates: Mapping[str, Tokens],
    references: ReferenceSet,
    smooth: bool = True,
) -> float:
    """Corpus BLEU-4 of candidates against their per-sample references."""
    if not candidates:
        raise ValidationError("no candidates to evaluate")
    numer = [0] * BLEU_MAX_N
    denom = [0] * BLEU_MAX_N
    total_cand = 0
    total_ref = 0
    for sample_id, cand in candidates.items():
        if sample_id not in references:
            raise ValidationError(f"candidate {sample_id!r} has no reference entry")
        refs = references[sample_id]
        _check_refs(sample_id, refs)
        total_cand += len(cand)
        total_ref += _closest_ref_length(len(cand), refs)
        for n in range(1, BLEU_MAX_N + 1):
            cand_counts = _ngrams(cand, n)
            if not cand_counts:
                continue
            max_ref = Counter()
            for ref in refs:
                for gram, count in _ngrams(ref, n).items():
                    if count > max_ref[gram]:
                        max_ref[gram] = count
            clipped = sum(min(count, max_ref[gram]) for gram, count in cand_counts.items())
            numer[n - 1] += clipped
            denom[n - 1] += sum(cand_counts.values())

    if total_cand == 0:
        logger.warning("bleu4: every candidate is empty; score is 0")
        return 0.0

    log_sum = 0.0
    for n in range(1, BLEU_MAX_N + 1):
        num, den = numer[n - 1], denom[n - 1]
        if smooth and n >= 2:
            num, den = num + 1, den + 1
        if num == 0:
            return 0.0
        log_sum += math.log(num / den) / BLEU_MAX_N

    if total_cand > total_ref:
        bp = 1.0
    else:
        bp = math.exp(1.0 - total_ref / total_cand)
    return bp * math.exp(log_sum)


def _lcs_length(a: Tokens, b: Tokens) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            cur[j] = prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge_l(
    candidates: Mapping[str, Tokens],
    references: ReferenceSet,
    beta: float = ROUGE_BETA,
) -> float:
    """Mean over samples of the best LCS F-measure against any reference."""
    if not candidates:
        raise ValidationError("no candidates to evaluate")
    if beta <= 0:
        raise ValidationError(f"beta must be positive, got {beta}")
    beta_sq = beta * beta
    total = 0.0
    for sample_id, cand in candidates.items():
        if sample_id not in references:
            raise ValidationError(f"candidate {sample_id!r} has no reference entry")
        refs = references[sample_id]
        _check_refs(sample_id, refs)
        best = 0.0
        for ref in refs:
            lcs = _lcs_length(cand, ref)
            if lcs == 0 or not cand:
                continue
            recall = lcs / len(ref)
            precision = lcs / len(cand)
            f = (1 + beta_sq) * recall * precision / (recall + beta_sq * precision)
            if f > best:
                best = f
        total += best
    return total / len(candidates)
