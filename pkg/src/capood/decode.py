"""Caption decoding over an arbitrary next-token distribution provider.

Four strategies share one contract:

- greedy: the argmax token at every step.
- beam: width-K search ranked by unnormalized sum of log-probabilities.
- top-k: sample from the renormalized K most probable tokens.
- nucleus: sample from the renormalized smallest descending-probability
  prefix whose cumulative mass reaches ``p``.

Every tie anywhere (argmax, pool membership, beam ranking) breaks toward
the lowest token id / lexicographically smallest token-id sequence, so a
(provider, config) pair fully determines the greedy/beam output and a
(provider, config, seed) triple fully determines sampled output.

Emitted token records carry the provider's *original* log-probability for
the chosen token, never the pool-renormalized one; the sum of record
logprobs is therefore the caption's model log-likelihood. A decoded caption
ends either with the end token (``terminated=True``, end record included)
or at ``max_len`` emitted records (``terminated=False``).

Providers see the prefix of *body* token ids generated so far (no begin/end
specials; an empty prefix means the first step). Each returned distribution
must have one entry per vocabulary token, be non-negative and finite, and
sum to 1 within 1e-6; violations raise ``DistributionError`` naming the
step. Sampling consumes exactly one uniform draw per emitted record from
the splitmix64 stream of the configured seed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import DistributionError, ValidationError
from .records import ScoredCaption, TokenRecord, Vocabulary
from .rng import Rng

logger = logging.getLogger(__name__)

STRATEGIES = ("greedy", "beam", "topk", "nucleus")

# |sum - 1| beyond this fails validation.
DIST_SUM_TOL = 1e-6


@runtime_checkable
class DistributionProvider(Protocol):
    """Anything that maps a generated-so-far token prefix to the next-token
    probability distribution. Implementations are bound to one input (e.g.
    one image)."""

    def next_distribution(self, prefix: Sequence[int]) -> Sequence[float]: ...


@dataclass(frozen=True)
class DecodeConfig:
    """Strategy plus its parameters.

    ``k`` applies to beam and top-k; ``p`` to nucleus; ``seed`` to the two
    sampling strategies. ``max_len`` caps emitted records per caption,
    counting the end token.
    """

    strategy: str = "greedy"
    k: int = 1
    p: float = 0.9
    max_len: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValidationError(
                f"unknown strategy {self.strategy!r}, expected one of {', '.join(STRATEGIES)}"
            )
        if self.max_len < 1:
            raise ValidationError(f"max_len must be >= 1, got {self.max_len}")
        if self.strategy in ("beam", "topk") and self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if self.strategy == "nucleus" and not 0.0 < self.p <= 1.0:
            raise ValidationError(f"p must be in (0, 1], got {self.p}")
        if self.seed < 0:
            raise ValidationError(f"seed must be >= 0, got {self.seed}")

    def label(self) -> str:
        """Compact form used in filenames and CLI: greedy, beam:4, topk:10,
        nucleus:0.8."""
        if self.strategy == "greedy":
            return "greedy"
        if self.strategy == "nucleus":
            return f"nucleus:{self.p:g}"
        return f"{self.strategy}:{self.k}"

    @classmethod
    def parse(cls, text: str, *, max_len: int = 16, seed: int = 0) -> "DecodeConfig":
        """Inverse of ``label()``: 'greedy', 'beam:K', 'topk:K', 'nucleus:P'."""
        name, _, arg = text.partition(":")
        if name == "greedy":
            if arg:
                raise ValidationError(f"greedy takes no parameter, got {text!r}")
            return cls("greedy", max_len=max_len, seed=seed)
        if name in ("beam", "topk"):
            try:
                k = int(arg)
            except ValueError:
                raise ValidationError(f"{name} needs an integer K, got {text!r}") from None
            return cls(name, k=k, max_len=max_len, seed=seed)
        if name == "nucleus":
            try:
                p = float(arg)
            except ValueError:
                raise ValidationError(f"nucleus needs a float p, got {text!r}") from None
            return cls("nucleus", p=p, max_len=max_len, seed=seed)
        raise ValidationError(f"unknown strategy {text!r}")

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy,
            "k": self.k,
            "p": self.p,
            "max_len": self.max_len,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DecodeConfig":
        known = {"strategy", "k", "p", "max_len", "seed"}
        extra = set(obj) - known
        if extra:
            raise ValidationError(f"unknown decode config keys: {sorted(extra)}")
        return cls(**obj)


def _checked_distribution(
    provider: DistributionProvider, prefix: tuple[int, ...], vocab_size: int, step: int
) -> np.ndarray:
    dist = np.asarray(provider.next_distribution(prefix), dtype=np.float64)
    if dist.shape != (vocab_size,):
        raise DistributionError(
            f"step {step}: distribution has shape {dist.shape}, expected ({vocab_size},)"
        )
    if not np.all(np.isfinite(dist)):
        raise DistributionError(f"step {step}: distribution contains non-finite entries")
    if np.any(dist < 0.0):
        raise DistributionError(f"step {step}: distribution contains negative entries")
    total = float(dist.sum())
    if abs(total - 1.0) > DIST_SUM_TOL:
        raise DistributionError(
            f"step {step}: distribution sums to {total!r}, expected 1 within {DIST_SUM_TOL}"
        )
    return dist


def _descending_order(dist: np.ndarray) -> np.ndarray:
    """Token ids sorted by probability descending, lowest id first on ties.

    Stable sort over -dist preserves ascending id order within equal
    probabilities, which is exactly the tie rule.
    """
    return np.argsort(-dist, kind="stable")


def _sample_from_pool(dist: np.ndarray, pool: np.ndarray, rng: Rng) -> int:
    """One inverse-CDF draw from the pool under renormalized probabilities.

    Zero-probability pool members are never selected: their cumulative value
    equals their predecessor's, so searchsorted skips them, and the final
    backstop walks off trailing zeros if the float guard clamps the index.
    """
    weights = dist[pool]
    q = weights / float(weights.sum())
    cum = np.cumsum(q)
    u = rng.uniform()
    j = int(np.searchsorted(cum, u, side="right"))
    if j >= len(pool):
        j = len(pool) - 1
    while j > 0 and weights[j] == 0.0:
        j -= 1
    return int(pool[j])


def _run_stepwise(
    choose,
    provider: DistributionProvider,
    vocab: Vocabulary,
    max_len: int,
    sample_id: str,
    set_id: str,
) -> ScoredCaption:
    """Shared loop for greedy and the two sampling strategies: one chosen
    token per step, stop at the end token or the length cap."""
    prefix: tuple[int, ...] = ()
    records: list[TokenRecord] = []
    for step in range(max_len):
        dist = _checked_distribution(provider, prefix, len(vocab), step)
        token_id = choose(dist)
        p = float(dist[token_id])
        if p <= 0.0:
            raise DistributionError(
                f"step {step}: chosen token {token_id} has zero probability"
            )
        records.append(TokenRecord(token_id, math.log(p)))
        if token_id == vocab.eos_id:
            return ScoredCaption(sample_id, set_id, tuple(records), True)
        prefix += (token_id,)
    return ScoredCaption(sample_id, set_id, tuple(records), False)


def decode_greedy(
    provider: DistributionProvider,
    vocab: Vocabulary,
    max_len: int = 16,
    sample_id: str = "sample",
    set_id: str = "default",
) -> ScoredCaption:
    """Argmax at every step; ties go to the lowest token id."""

    def choose(dist: np.ndarray) -> int:
        return int(np.argmax(dist))

    return _run_stepwise(choose, provider, vocab, max_len, sample_id, set_id)


def decode_topk(
    provider: DistributionProvider,
    vocab: Vocabulary,
    k: int,
    max_len: int = 16,
    seed: int = 0,
    sample_id: str = "sample",
    set_id: str = "default",
) -> ScoredCaption:
    """Sample each step from the K most probable tokens, renormalized.

    Ties at the pool boundary admit the lowest token id. K larger than the
    vocabulary is clamped with a warning. Records keep the original
    (pre-renormalization) log-probabilities.
    """
    if k > len(vocab):
        logger.warning("top-k k=%d exceeds vocabulary size %d; clamping", k, len(vocab))
        k = len(vocab)
    rng = Rng(seed)

    def choose(dist: np.ndarray) -> int:
        pool = _descending_order(dist)[:k]
        return _sample_from_pool(dist, pool, rng)

    return _run_stepwise(choose, provider, vocab, max_len, sample_id, set_id)


def decode_nucleus(
    provider: DistributionProvider,
    vocab: Vocabulary,
    p: float,
    max_len: int = 16,
    seed: int = 0,
    sample_id: str = "sample",
    set_id: str = "default",
) -> ScoredCaption:
    """Sample each step from the smallest descending-probability prefix with
    cumulative mass >= p (comparison in double precision), renormalized.

    p=1 uses the whole vocabulary. Records keep original log-probabilities.
    """
    rng = Rng(seed)

    def choose(dist: np.ndarray) -> int:
        order = _descending_order(dist)
        cum = np.cumsum(dist[order])
        cut = int(np.searchsorted(cum, p, side="left")) + 1
        pool = order[: min(cut, len(order))]
        return _sample_from_pool(dist, pool, rng)

    return _run_stepwise(choose, provider, vocab, max_len, sample_id, set_id)


@dataclass(frozen=True)
class _Hypothesis:
    prefix: tuple[int, ...]  # body ids generated so far
    records: tuple[TokenRecord, ...]
    score: float  # sum of record logprobs


def decode_beam(
    provider: DistributionProvider,
    vocab: Vocabulary,
    k: int,
    max_len: int = 16,
    sample_id: str = "sample",
    set_id: str = "default",
) -> ScoredCaption:
    """Width-K beam search under unnormalized sum-of-logprob ranking.

    Each step extends every live hypothesis by every positive-probability
    token, ranks all candidates by (score desc, token-id sequence asc), and
    keeps the top K. Extensions ending in the end token move to the
    completed pool and free their beam slot. The result is the best
    completed hypothesis, or the best live one when nothing completed
    within ``max_len`` (then ``terminated=False``). K=1 reproduces greedy
    exactly, including termination behavior.
    """
    if k > len(vocab):
        logger.warning("beam width k=%d exceeds vocabulary size %d; clamping", k, len(vocab))
        k = len(vocab)

    live = [_Hypothesis((), (), 0.0)]
    completed: list[tuple[float, tuple[int, ...], _Hypothesis]] = []
    for step in range(max_len):
        candidates: list[tuple[float, tuple[int, ...], _Hypothesis, int, float]] = []
        for hyp in live:
            dist = _checked_distribution(provider, hyp.prefix, len(vocab), step)
            for token_id in np.nonzero(dist > 0.0)[0]:
                token_id = int(token_id)
                lp = math.log(float(dist[token_id]))
                candidates.append(
                    (hyp.score + lp, hyp.prefix + (token_id,), hyp, token_id, lp)
                )
        candidates.sort(key=lambda c: (-c[0], c[1]))
        new_live = []
        for score, seq, hyp, token_id, lp in candidates[:k]:
            records = hyp.records + (TokenRecord(token_id, lp),)
            if token_id == vocab.eos_id:
                completed.append((score, seq, _Hypothesis(hyp.prefix, records, score)))
            else:
                new_live.append(_Hypothesis(seq, records, score))
        live = new_live
        if not live:
            break

    if completed:
        completed.sort(key=lambda c: (-c[0], c[1]))
        best = completed[0][2]
        return ScoredCaption(sample_id, set_id, best.records, True)
    if not live:
        # max_len >= 1 and distributions sum to 1, so step 0 always yields
        # candidates; an empty beam without completions cannot happen.
        raise AssertionError("beam search ended with no hypotheses")
    return ScoredCaption(sample_id, set_id, live[0].records, False)


def decode(
    provider: DistributionProvider,
    vocab: Vocabulary,
    config: DecodeConfig,
    sample_id: str = "sample",
    set_id: str = "default",
) -> ScoredCaption:
    """Dispatch on ``config.strategy``."""
    if config.strategy == "greedy":
        return decode_greedy(provider, vocab, config.max_len, sample_id, set_id)
    if config.strategy == "beam":
        return decode_beam(provider, vocab, config.k, config.max_len, sample_id, set_id)
    if config.strategy == "topk":
        return decode_topk(
            provider, vocab, config.k, config.max_len, config.seed, sample_id, set_id
        )
    return decode_nucleus(
        provider, vocab, config.p, config.max_len, config.seed, sample_id, set_id
    )
