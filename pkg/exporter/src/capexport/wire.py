"""Line formats the exporter emits, plus self-validation.

Two JSONL record shapes, matching what the scoring toolkit ingests:

Token records, one caption per line::

    {"sample_id": "img_003", "set_id": "val", "tokens":
     [{"t": "a", "lp": -0.22, "pos": "DET"}, {"t": "</s>", "lp": -0.05}],
     "terminated": true}

Every ``lp`` is a finite logprob (<= 0). ``pos`` is optional per token and,
when present, one of the seven coarse tags. A terminated caption ends with
the end-of-sequence token and contains it nowhere else; an unterminated
caption does not contain it at all.

Class-probability records, one image per line::

    {"sample_id": "img_003", "probs": [0.7, 0.2, 0.1]}

with non-negative entries summing to one within a small tolerance.

The exporter validates each line against these rules right before writing
it. A failure here means the exporter itself produced a malformed record,
so it aborts rather than ship a file the consumer would reject halfway in.
"""

from __future__ import annotations

import math

from .errors import InputError, SchemaError

POS_TAGS = ("NOUN", "VERB", "ADJ", "DET", "ADV", "ADP", "OTHER")

PROB_SUM_TOL = 1e-6


def caption_line(
    sample_id: str,
    set_id: str,
    tokens: list[dict],
    terminated: bool,
) -> dict:
    """Assemble one token-record line in canonical key order."""
    return {
        "sample_id": sample_id,
        "set_id": set_id,
        "tokens": tokens,
        "terminated": terminated,
    }


def classprob_line(sample_id: str, probs: list[float]) -> dict:
    return {"sample_id": sample_id, "probs": [float(p) for p in probs]}


def _require_str(obj: dict, key: str) -> str:
    value = obj.get(key)
    if not isinstance(value, str) or not value:
        raise SchemaError(f"'{key}' must be a non-empty string, got {value!r}")
    return value


def validate_caption_line(obj: dict, eos_token: str) -> None:
    """Check one token-record line; raise SchemaError on any violation."""
    _require_str(obj, "sample_id")
    _require_str(obj, "set_id")
    terminated = obj.get("terminated")
    if not isinstance(terminated, bool):
        raise SchemaError(f"'terminated' must be a bool, got {terminated!r}")
    tokens = obj.get("tokens")
    if not isinstance(tokens, list):
        raise SchemaError("'tokens' must be a list")
    for i, tok in enumerate(tokens):
        if not isinstance(tok, dict):
            raise SchemaError(f"tokens[{i}] must be an object")
        text = tok.get("t")
        if not isinstance(text, str) or not text:
            raise SchemaError(f"tokens[{i}].t must be a non-empty string, got {text!r}")
        lp = tok.get("lp")
        if isinstance(lp, bool) or not isinstance(lp, (int, float)):
            raise SchemaError(f"tokens[{i}].lp must be a number, got {lp!r}")
        if not math.isfinite(lp) or lp > 0.0:
            raise SchemaError(f"tokens[{i}].lp must be finite and <= 0, got {lp!r}")
        if "pos" in tok and tok["pos"] not in POS_TAGS:
            raise SchemaError(f"tokens[{i}].pos must be one of {POS_TAGS}, got {tok['pos']!r}")
        if text == eos_token and (not terminated or i != len(tokens) - 1):
            raise SchemaError(f"end token {eos_token!r} at position {i} of {len(tokens)}")
    if terminated:
        if not tokens:
            raise SchemaError("a terminated caption must contain at least the end token")
        if tokens[-1]["t"] != eos_token:
            raise SchemaError(
                f"terminated caption must end with {eos_token!r}, got {tokens[-1]['t']!r}"
            )


def validate_classprob_line(obj: dict) -> None:
    """Check one class-probability line; raise SchemaError on any violation."""
    _require_str(obj, "sample_id")
    probs = obj.get("probs")
    if not isinstance(probs, list) or not probs:
        raise SchemaError("'probs' must be a non-empty list")
    total = 0.0
    for i, p in enumerate(probs):
        if isinstance(p, bool) or not isinstance(p, (int, float)):
            raise SchemaError(f"probs[{i}] must be a number, got {p!r}")
        if not math.isfinite(p) or p < 0.0:
            raise SchemaError(f"probs[{i}] must be finite and >= 0, got {p!r}")
        total += float(p)
    if abs(total - 1.0) > PROB_SUM_TOL:
        raise SchemaError(f"probs sum to {total!r}, expected 1 within {PROB_SUM_TOL}")


def load_pos_lexicon(path: str) -> dict[str, str]:
    """Read a token<TAB>TAG lexicon; tags must be coarse tags."""
    mapping: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8") as handle:
            for lineno, raw in enumerate(handle, start=1):
                line = raw.rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 2 or not parts[0]:
                    raise InputError(f"{path}:{lineno}: expected 'token<TAB>TAG'")
                token, tag = parts
                if tag not in POS_TAGS:
                    raise InputError(f"{path}:{lineno}: unknown tag {tag!r}")
                mapping[token] = tag
    except OSError as exc:
        raise InputError(f"cannot read lexicon {path}: {exc}") from exc
    return mapping
