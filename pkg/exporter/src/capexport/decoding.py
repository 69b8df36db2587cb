"""Decoding loops that turn a captioner's step distributions into token
records.

The algorithms here deliberately mirror the scoring side's decoders, because
an exported record only means something if the downstream scorer would have
produced the same tokens from the same distributions:

- greedy picks the most probable token, lowest id on ties;
- beam keeps the k best partial captions by summed logprob (ties broken
  toward the lexicographically smaller id sequence), moves beams that emit
  the end token into a completed pool, and returns the best completed
  caption, falling back to the best live beam if nothing completed;
- top-k samples from the k most probable tokens (ties toward lower ids),
  renormalized;
- nucleus samples from the smallest descending-probability prefix whose
  cumulative mass reaches p, renormalized.

Every recorded logprob is ln of the model's original probability, taken
before any pool renormalization, so records stay faithful to the model
rather than to the sampling transform.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .adapters import CaptionModel
from .errors import ExportError, InputError

DIST_SUM_TOL = 1e-6


@dataclass(frozen=True)
class Strategy:
    """Parsed decoding strategy: name plus whichever knob it uses."""

    name: str
    k: int = 1
    p: float = 1.0

    def __post_init__(self):
        if self.name not in ("greedy", "beam", "topk", "nucleus"):
            raise InputError(f"unknown decoding strategy {self.name!r}")
        if self.name in ("beam", "topk") and self.k < 1:
            raise InputError(f"{self.name} width must be >= 1, got {self.k}")
        if self.name == "nucleus" and not 0.0 < self.p <= 1.0:
            raise InputError(f"nucleus mass must be in (0, 1], got {self.p}")

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        """Parse 'greedy', 'beam:K', 'topk:K', or 'nucleus:P'."""
        name, sep, arg = text.partition(":")
        if name == "greedy":
            if sep:
                raise InputError("greedy takes no argument")
            return cls("greedy")
        if name in ("beam", "topk"):
            try:
                k = int(arg)
            except ValueError:
                raise InputError(f"{text!r}: expected an integer after '{name}:'") from None
            return cls(name, k=k)
        if name == "nucleus":
            try:
                p = float(arg)
            except ValueError:
                raise InputError(f"{text!r}: expected a number after 'nucleus:'") from None
            return cls("nucleus", p=p)
        raise InputError(
            f"unknown strategy {text!r}; use greedy, beam:K, topk:K, or nucleus:P"
        )

    def label(self) -> str:
        if self.name == "greedy":
            return "greedy"
        if self.name == "nucleus":
            return f"nucleus:{self.p:g}"
        return f"{self.name}:{self.k}"


@dataclass(frozen=True)
class Step:
    """One emitted token with its model logprob."""

    token_id: int
    logprob: float


def _checked(dist: Sequence[float], size: int) -> np.ndarray:
    arr = np.asarray(dist, dtype=np.float64)
    if arr.shape != (size,):
        raise ExportError(f"model returned {arr.shape} probabilities, expected ({size},)")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
        raise ExportError("model distribution has negative or non-finite entries")
    if abs(float(arr.sum()) - 1.0) > DIST_SUM_TOL:
        raise ExportError(f"model distribution sums to {float(arr.sum())!r}, not 1")
    return arr


def _logprob(p: float) -> float:
    return math.log(p) if p > 0.0 else -math.inf


def _decode_greedy(model: CaptionModel, encoded: object, max_len: int) -> tuple[list[Step], bool]:
    size = len(model.tokens)
    steps: list[Step] = []
    prefix: list[int] = []
    for _ in range(max_len):
        dist = _checked(model.next_distribution(encoded, prefix), size)
        token = int(np.argmax(dist))
        steps.append(Step(token, _logprob(float(dist[token]))))
        if token == model.eos_id:
            return steps, True
        prefix.append(token)
    return steps, False


@dataclass(frozen=True)
class _Beam:
    seq: tuple[int, ...] = ()
    steps: tuple[Step, ...] = field(default=())
    score: float = 0.0


def _decode_beam(
    model: CaptionModel, encoded: object, max_len: int, k: int
) -> tuple[list[Step], bool]:
    size = len(model.tokens)
    live = [_Beam()]
    completed: list[_Beam] = []
    for _ in range(max_len):
        candidates: list[_Beam] = []
        for beam in live:
            dist = _checked(model.next_distribution(encoded, beam.seq), size)
            for token in range(size):
                lp = _logprob(float(dist[token]))
                candidates.append(
                    _Beam(
                        beam.seq + (token,),
                        beam.steps + (Step(token, lp),),
                        beam.score + lp,
                    )
                )
        candidates.sort(key=lambda b: (-b.score, b.seq))
        live = []
        for beam in candidates[:k]:
            if beam.seq[-1] == model.eos_id:
                completed.append(beam)
            else:
                live.append(beam)
        if not live:
            break
    pool = completed if completed else live
    best = min(pool, key=lambda b: (-b.score, b.seq))
    return list(best.steps), best.seq[-1] == model.eos_id


def _sample_pool(
    dist: np.ndarray, pool: np.ndarray, rng: random.Random
) -> tuple[int, float]:
    # Zero-probability tokens carry no mass; dropping them keeps a rounding
    # edge in the inverse-CDF lookup from ever selecting one.
    pool = pool[dist[pool] > 0.0]
    weights = dist[pool]
    total = float(weights.sum())
    if total <= 0.0:
        raise ExportError("sampling pool has zero total probability")
    u = rng.random() * total
    cum = np.cumsum(weights)
    idx = int(np.searchsorted(cum, u, side="right"))
    idx = min(idx, len(pool) - 1)
    token = int(pool[idx])
    return token, _logprob(float(dist[token]))


def _decode_sampled(
    model: CaptionModel,
    encoded: object,
    max_len: int,
    strategy: Strategy,
    rng: random.Random,
) -> tuple[list[Step], bool]:
    size = len(model.tokens)
    steps: list[Step] = []
    prefix: list[int] = []
    for _ in range(max_len):
        dist = _checked(model.next_distribution(encoded, prefix), size)
        order = np.lexsort((np.arange(size), -dist))
        if strategy.name == "topk":
            pool = order[: strategy.k]
        else:
            cum = np.cumsum(dist[order])
            cut = int(np.searchsorted(cum, strategy.p, side="left")) + 1
            pool = order[:cut]
        token, lp = _sample_pool(dist, pool, rng)
        steps.append(Step(token, lp))
        if token == model.eos_id:
            return steps, True
        prefix.append(token)
    return steps, False


def decode_caption(
    model: CaptionModel,
    encoded: object,
    strategy: Strategy,
    max_len: int,
    seed: int,
) -> tuple[list[Step], bool]:
    """Run one decoding strategy to completion for one image.

    Returns the emitted steps and whether the caption terminated with the
    end token within ``max_len`` steps (the end token record counts toward
    the cap). Sampling strategies draw from a fresh generator seeded with
    ``seed`` so a rerun reproduces the file byte for byte.
    """
    if max_len < 1:
        raise InputError(f"max_len must be >= 1, got {max_len}")
    if strategy.name == "greedy":
        return _decode_greedy(model, encoded, max_len)
    if strategy.name == "beam":
        return _decode_beam(model, encoded, max_len, strategy.k)
    return _decode_sampled(model, encoded, max_len, strategy, random.Random(seed))
