"""Core data types and their wire formats.

Everything downstream (decoders, scorers, metrics, the exporter package)
talks through the types in this module and the line-oriented files they
serialize to:

- token-record lines (JSONL): one scored caption per line,
  ``{"sample_id": str, "set_id": str, "tokens": [{"t": str|int,
  "lp": float, "pos": str?}, ...], "terminated": bool}``
- score lines (JSONL): ``{"sample_id": str, "set_id": str, "score": float,
  "label": "IN"|"OUT"}``
- class-prob lines (JSONL): ``{"sample_id": str, "probs": [float, ...]}``
- POS lexicon (TSV): ``token<TAB>TAG`` per line
- vocabulary (JSON): ``{"tokens": [...], "bos_id": int, "eos_id": int,
  "unk_id": int}``
- reference captions (JSONL): ``{"sample_id": str, "refs": [[token, ...],
  ...]}``

A caption with ``terminated: true`` must end with the vocabulary's end
token record; that final record carries the stop probability and the end id
may not appear anywhere else in the caption. Loaders raise ``FormatError``
with the offending line number; unknown token *strings* map to the unknown
id and are counted in ``IngestStats`` rather than dropped, while integer
token ids outside the vocabulary are hard errors.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Mapping, Sequence

from .errors import FormatError, ValidationError

logger = logging.getLogger(__name__)

POS_TAGS = ("NOUN", "VERB", "ADJ", "DET", "ADV", "ADP", "OTHER")

Label = Literal["IN", "OUT"]
LABELS = ("IN", "OUT")

# Tolerance for "probabilities sum to one" checks on ingested data.
PROB_SUM_TOL = 1e-6


@dataclass(frozen=True)
class Vocabulary:
    """Ordered token inventory with begin/end/unknown specials.

    Token ids are positions in ``tokens``. The three special ids must be
    distinct and in range; token strings must be unique and non-empty.
    """

    tokens: tuple[str, ...]
    bos_id: int
    eos_id: int
    unk_id: int

    def __post_init__(self):
        if len(self.tokens) < 3:
            raise ValidationError(
                f"vocabulary needs at least 3 tokens for the specials, got {len(self.tokens)}"
            )
        seen: dict[str, int] = {}
        for i, tok in enumerate(self.tokens):
            if not tok:
                raise ValidationError(f"empty token string at id {i}")
            if tok in seen:
                raise ValidationError(f"duplicate token {tok!r} at ids {seen[tok]} and {i}")
            seen[tok] = i
        specials = (self.bos_id, self.eos_id, self.unk_id)
        for sid in specials:
            if not 0 <= sid < len(self.tokens):
                raise ValidationError(f"special id {sid} out of range 0..{len(self.tokens) - 1}")
        if len(set(specials)) != 3:
            raise ValidationError(f"begin/end/unknown ids must be distinct, got {specials}")
        object.__setattr__(self, "_index", seen)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index  # type: ignore[attr-defined]

    def id_of(self, token: str) -> int:
        """Exact lookup; raises KeyError for tokens not in the vocabulary."""
        return self._index[token]  # type: ignore[attr-defined]

    def id_or_unk(self, token: str) -> int:
        return self._index.get(token, self.unk_id)  # type: ignore[attr-defined]

    def token(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.tokens):
            raise ValidationError(f"token id {token_id} out of range 0..{len(self.tokens) - 1}")
        return self.tokens[token_id]

    def to_json(self) -> dict:
        return {
            "tokens": list(self.tokens),
            "bos_id": self.bos_id,
            "eos_id": self.eos_id,
            "unk_id": self.unk_id,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "Vocabulary":
        try:
            tokens = tuple(obj["tokens"])
            return cls(tokens, int(obj["bos_id"]), int(obj["eos_id"]), int(obj["unk_id"]))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed vocabulary object: {exc!r}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc}", path=str(path)) from exc
        return cls.from_json(obj)


@dataclass(frozen=True)
class PosLexicon:
    """token -> part-of-speech tag map. Unmapped tokens read as OTHER."""

    mapping: Mapping[str, str]

    def __post_init__(self):
        for token, tag in self.mapping.items():
            if tag not in POS_TAGS:
                raise ValidationError(f"unknown POS tag {tag!r} for token {token!r}")

    def tag(self, token: str) -> str:
        return self.mapping.get(token, "OTHER")

    def save(self, path: str | Path) -> None:
        lines = "".join(f"{token}\t{tag}\n" for token, tag in self.mapping.items())
        Path(path).write_text(lines, encoding="utf-8")


def load_pos_lexicon(path: str | Path) -> PosLexicon:
    """Parse a token<TAB>TAG file. Duplicate tokens and unknown tags are errors."""
    mapping: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError(
                    f"expected token<TAB>TAG, got {line!r}", path=str(path), line=lineno
                )
            token, tag = parts
            if not token:
                raise FormatError("empty token", path=str(path), line=lineno)
            if tag not in POS_TAGS:
                raise FormatError(
                    f"unknown POS tag {tag!r} (expected one of {', '.join(POS_TAGS)})",
                    path=str(path),
                    line=lineno,
                )
            if token in mapping:
                raise FormatError(f"duplicate token {token!r}", path=str(path), line=lineno)
            mapping[token] = tag
    return PosLexicon(mapping)


@dataclass(frozen=True)
class TokenRecord:
    """One scored step: the chosen token id, its log-probability under the
    model at the step it was chosen, and an optional POS tag."""

    token_id: int
    logprob: float
    pos: str | None = None

    def __post_init__(self):
        if self.token_id < 0:
            raise ValidationError(f"negative token id {self.token_id}")
        if not math.isfinite(self.logprob):
            raise ValidationError(f"non-finite logprob {self.logprob!r}")
        if self.logprob > 0.0:
            raise ValidationError(f"logprob must be <= 0, got {self.logprob!r}")
        if self.pos is not None and self.pos not in POS_TAGS:
            raise ValidationError(f"unknown POS tag {self.pos!r}")


@dataclass(frozen=True)
class ScoredCaption:
    """A decoded caption for one image: sample identity, per-token records,
    and whether decoding stopped at the end token (vs. the length cap).

    When ``terminated`` is true the final record is the end token; ``body``
    strips it, so body tokens are exactly the caption words.
    """

    sample_id: str
    set_id: str
    tokens: tuple[TokenRecord, ...]
    terminated: bool

    def __post_init__(self):
        if not self.sample_id:
            raise ValidationError("empty sample_id")
        if self.terminated and not self.tokens:
            raise ValidationError(
                f"sample {self.sample_id!r}: terminated caption must contain the end token record"
            )

    def validate_against(self, vocab: Vocabulary) -> None:
        """Check id ranges and the end-token placement convention."""
        for i, rec in enumerate(self.tokens):
            if rec.token_id >= len(vocab):
                raise ValidationError(
                    f"sample {self.sample_id!r}: token id {rec.token_id} out of range"
                    f" for vocabulary of size {len(vocab)}"
                )
            is_last = i == len(self.tokens) - 1
            if rec.token_id == vocab.eos_id and not (self.terminated and is_last):
                raise ValidationError(
                    f"sample {self.sample_id!r}: end token at position {i} of"
                    f" {len(self.tokens)}; it may only close a terminated caption"
                )
        if self.terminated and self.tokens[-1].token_id != vocab.eos_id:
            raise ValidationError(
                f"sample {self.sample_id!r}: terminated caption must end with the end token"
            )

    def body(self) -> tuple[TokenRecord, ...]:
        """Token records minus the trailing end-token record, if any."""
        if self.terminated:
            return self.tokens[:-1]
        return self.tokens

    def words(self, vocab: Vocabulary) -> list[str]:
        return [vocab.token(rec.token_id) for rec in self.body()]

    def text(self, vocab: Vocabulary) -> str:
        return " ".join(self.words(vocab))


@dataclass(frozen=True)
class SampleScore:
    """One sample's detection score plus its ground-truth group label."""

    sample_id: str
    set_id: str
    score: float
    label: Label

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ValidationError(f"sample {self.sample_id!r}: non-finite score {self.score!r}")
        if self.label not in LABELS:
            raise ValidationError(f"sample {self.sample_id!r}: label must be IN or OUT")


@dataclass(frozen=True)
class ClassProbRecord:
    """Classifier posterior for one sample (used by the max-softmax baseline)."""

    sample_id: str
    probs: tuple[float, ...]

    def __post_init__(self):
        if not self.probs:
            raise ValidationError(f"sample {self.sample_id!r}: empty probability vector")
        for p in self.probs:
            if not math.isfinite(p) or p < 0.0:
                raise ValidationError(
                    f"sample {self.sample_id!r}: probabilities must be finite and >= 0"
                )
        total = math.fsum(self.probs)
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValidationError(
                f"sample {self.sample_id!r}: probabilities sum to {total!r}, expected 1"
                f" within {PROB_SUM_TOL}"
            )


@dataclass
class IngestStats:
    """Counters surfaced by ``load_records``; unknown tokens are mapped to
    the unknown id, counted here, and reported once via logging."""

    unknown_tokens: int = 0
    captions: int = 0
    unknown_examples: list[str] = field(default_factory=list)


def _records_from_obj(
    obj: Mapping, vocab: Vocabulary, stats: IngestStats, path: str, lineno: int
) -> ScoredCaption:
    def fail(msg: str) -> FormatError:
        return FormatError(msg, path=path, line=lineno)

    for key in ("sample_id", "set_id", "tokens", "terminated"):
        if key not in obj:
            raise fail(f"missing key {key!r}")
    sample_id, set_id = obj["sample_id"], obj["set_id"]
    if not isinstance(sample_id, str) or not isinstance(set_id, str):
        raise fail("sample_id and set_id must be strings")
    if not isinstance(obj["terminated"], bool):
        raise fail("terminated must be a boolean")
    if not isinstance(obj["tokens"], list):
        raise fail("tokens must be a list")

    recs = []
    for pos_idx, entry in enumerate(obj["tokens"]):
        if not isinstance(entry, Mapping) or "t" not in entry or "lp" not in entry:
            raise fail(f"token {pos_idx}: expected an object with 't' and 'lp'")
        t = entry["t"]
        if isinstance(t, bool):
            raise fail(f"token {pos_idx}: 't' must be a string or integer id")
        if isinstance(t, str):
            token_id = vocab.id_or_unk(t)
            if token_id == vocab.unk_id and t != vocab.token(vocab.unk_id):
                stats.unknown_tokens += 1
                if len(stats.unknown_examples) < 5:
                    stats.unknown_examples.append(t)
        elif isinstance(t, int):
            if not 0 <= t < len(vocab):
                raise fail(
                    f"token {pos_idx}: id {t} out of range for vocabulary of size {len(vocab)}"
                )
            token_id = t
        else:
            raise fail(f"token {pos_idx}: 't' must be a string or integer id")
        lp = entry["lp"]
        if isinstance(lp, bool) or not isinstance(lp, (int, float)):
            raise fail(f"token {pos_idx}: 'lp' must be a number")
        pos_tag = entry.get("pos")
        if pos_tag is not None and pos_tag not in POS_TAGS:
            raise fail(f"token {pos_idx}: unknown POS tag {pos_tag!r}")
        try:
            recs.append(TokenRecord(token_id, float(lp), pos_tag))
        except ValidationError as exc:
            raise fail(f"token {pos_idx}: {exc}") from exc

    try:
        caption = ScoredCaption(sample_id, set_id, tuple(recs), obj["terminated"])
        caption.validate_against(vocab)
    except ValidationError as exc:
        raise fail(str(exc)) from exc
    stats.captions += 1
    return caption


def load_records(
    path: str | Path, vocab: Vocabulary, stats: IngestStats | None = None
) -> list[ScoredCaption]:
    """Read token-record JSONL. Malformed lines raise ``FormatError`` with
    the line number; unknown token strings map to the unknown id and are
    tallied (pass ``stats`` to observe the count)."""
    stats = stats if stats is not None else IngestStats()
    captions: list[ScoredCaption] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON: {exc}", path=str(path), line=lineno) from exc
            if not isinstance(obj, Mapping):
                raise FormatError("line is not a JSON object", path=str(path), line=lineno)
            captions.append(_records_from_obj(obj, vocab, stats, str(path), lineno))
    if stats.unknown_tokens:
        logger.warning(
            "%s: %d unknown token(s) mapped to %r (examples: %s)",
            path,
            stats.unknown_tokens,
            vocab.token(vocab.unk_id),
            ", ".join(repr(t) for t in stats.unknown_examples),
        )
    return captions


def write_records(
    captions: Iterable[ScoredCaption], path: str | Path, vocab: Vocabulary
) -> None:
    """Write token-record JSONL with tokens spelled as strings.

    ``load_records(write_records(x))`` reproduces ``x`` exactly (unknown-id
    records round-trip through the unknown token string).
    """
    with open(path, "w", encoding="utf-8") as fh:
        for caption in captions:
            caption.validate_against(vocab)
            entry = {
                "sample_id": caption.sample_id,
                "set_id": caption.set_id,
                "tokens": [
                    {"t": vocab.token(rec.token_id), "lp": rec.logprob}
                    | ({"pos": rec.pos} if rec.pos is not None else {})
                    for rec in caption.tokens
                ],
                "terminated": caption.terminated,
            }
            fh.write(json.dumps(entry) + "\n")


def load_scores(path: str | Path) -> list[SampleScore]:
    scores: list[SampleScore] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON: {exc}", path=str(path), line=lineno) from exc
            try:
                scores.append(
                    SampleScore(
                        str(obj["sample_id"]),
                        str(obj.get("set_id", "")),
                        float(obj["score"]),
                        obj["label"],
                    )
                )
            except (KeyError, TypeError, ValidationError) as exc:
                raise FormatError(f"bad score line: {exc}", path=str(path), line=lineno) from exc
    return scores


def write_scores(scores: Iterable[SampleScore], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in scores:
            fh.write(
                json.dumps(
                    {
                        "sample_id": s.sample_id,
                        "set_id": s.set_id,
                        "score": s.score,
                        "label": s.label,
                    }
                )
                + "\n"
            )


def load_class_probs(path: str | Path) -> list[ClassProbRecord]:
    out: list[ClassProbRecord] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
                out.append(
                    ClassProbRecord(str(obj["sample_id"]), tuple(float(p) for p in obj["probs"]))
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValidationError) as exc:
                raise FormatError(
                    f"bad class-prob line: {exc}", path=str(path), line=lineno
                ) from exc
    return out


def write_class_probs(records: Iterable[ClassProbRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps({"sample_id": rec.sample_id, "probs": list(rec.probs)}) + "\n")


def load_references(path: str | Path) -> dict[str, list[list[str]]]:
    """Read reference-caption JSONL: sample_id -> list of token lists."""
    refs: dict[str, list[list[str]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
                sample_id = str(obj["sample_id"])
                entry = [[str(t) for t in ref] for ref in obj["refs"]]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise FormatError(
                    f"bad reference line: {exc}", path=str(path), line=lineno
                ) from exc
            if sample_id in refs:
                raise FormatError(
                    f"duplicate sample_id {sample_id!r}", path=str(path), line=lineno
                )
            if not entry or any(not ref for ref in entry):
                raise FormatError(
                    f"sample {sample_id!r} needs at least one non-empty reference",
                    path=str(path),
                    line=lineno,
                )
            refs[sample_id] = entry
    return refs


def write_references(refs: Mapping[str, Sequence[Sequence[str]]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sample_id, entry in refs.items():
            fh.write(
                json.dumps({"sample_id": sample_id, "refs": [list(r) for r in entry]}) + "\n"
            )
