"""Run a model over an image directory and write one record line per image.

The exporter is an adapter, not an analysis tool: it never computes scores
or detection statistics. It turns whatever a model emits into record lines,
validates each line against the wire format, and appends it to a single
output file. If any line fails validation, or any error other than an
unreadable image occurs, the partial output is deleted so a consumer never
sees a half-written file presented as complete.

Unreadable images are the one tolerated failure: they are skipped with a
warning on stderr, because a stray file in a directory of thousands should
not abort the run.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .adapters import CaptionModel, ClassifierModel, load_model
from .decoding import Strategy, decode_caption
from .errors import InputError
from .wire import (
    caption_line,
    classprob_line,
    load_pos_lexicon,
    validate_caption_line,
    validate_classprob_line,
)

IMAGE_EXTENSIONS = (".png", ".ppm", ".jpg", ".jpeg", ".bmp")

_PENN_TO_COARSE = {
    "NN": "NOUN",
    "VB": "VERB",
    "JJ": "ADJ",
    "DT": "DET",
    "PDT": "DET",
    "WDT": "DET",
    "RB": "ADV",
    "IN": "ADP",
    "TO": "ADP",
}


@dataclass(frozen=True)
class ExportJob:
    """Everything one export run needs, validated up front."""

    model: str
    images: str
    set_id: str
    out: str
    strategy: Strategy = field(default_factory=lambda: Strategy("greedy"))
    kind: str = "captions"
    max_len: int = 16
    seed: int = 0
    pos_lexicon: str | None = None

    def __post_init__(self):
        if not self.set_id:
            raise InputError("set_id must be non-empty")
        if self.kind not in ("captions", "classprobs"):
            raise InputError(f"kind must be 'captions' or 'classprobs', got {self.kind!r}")
        if self.max_len < 1:
            raise InputError(f"max_len must be >= 1, got {self.max_len}")
        if self.seed < 0:
            raise InputError(f"seed must be >= 0, got {self.seed}")


@dataclass(frozen=True)
class ExportStats:
    """What an export run did: lines written, unreadable images skipped."""

    written: int
    skipped: int


class _Tagger:
    """Part-of-speech lookup for body tokens.

    A token<TAB>TAG lexicon wins when given. Otherwise an installed nltk
    tagger is used opportunistically, with Penn tags folded down to the
    seven coarse tags; if neither is available, tokens simply carry no tag,
    which the wire format allows.
    """

    def __init__(self, lexicon_path: str | None):
        self._lexicon = load_pos_lexicon(lexicon_path) if lexicon_path else None
        self._nltk_tag = None
        if self._lexicon is None:
            try:
                from nltk import pos_tag

                self._nltk_tag = pos_tag
            except ImportError:
                pass

    def tag(self, token: str) -> str | None:
        if self._lexicon is not None:
            return self._lexicon.get(token)
        if self._nltk_tag is not None:
            try:
                penn = self._nltk_tag([token])[0][1]
            except LookupError:
                self._nltk_tag = None
                return None
            for prefix, coarse in _PENN_TO_COARSE.items():
                if penn.startswith(prefix):
                    return coarse
            return "OTHER"
        return None


def _image_paths(directory: str) -> list[Path]:
    root = Path(directory)
    if not root.is_dir():
        raise InputError(f"{directory} is not a directory")
    paths = sorted(
        p for p in root.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
    )
    if not paths:
        raise InputError(f"no image files found in {directory}")
    return paths


def _read_image(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def _caption_record(model: CaptionModel, image, job: ExportJob, sample_id: str,
                    index: int, tagger: _Tagger) -> dict:
    encoded = model.encode_image(image)
    steps, terminated = decode_caption(
        model, encoded, job.strategy, job.max_len, job.seed * 1_000_003 + index
    )
    tokens = []
    for step in steps:
        text = model.tokens[step.token_id]
        entry: dict = {"t": text, "lp": step.logprob}
        if step.token_id != model.eos_id:
            tag = tagger.tag(text)
            if tag is not None:
                entry["pos"] = tag
        tokens.append(entry)
    return caption_line(sample_id, job.set_id, tokens, terminated)


def run_export(job: ExportJob) -> ExportStats:
    """Execute one export job; returns line/skip counts on success."""
    model = load_model(job.model)
    if job.kind == "captions":
        if not isinstance(model, CaptionModel):
            raise InputError(f"{job.model!r} is not a captioning model")
        tagger = _Tagger(job.pos_lexicon)
        eos_token = model.tokens[model.eos_id]
    else:
        if not isinstance(model, ClassifierModel):
            raise InputError(f"{job.model!r} is not a classifier")
    paths = _image_paths(job.images)

    written = 0
    skipped = 0
    with open(job.out, "w", encoding="utf-8") as out:
        try:
            for index, path in enumerate(paths):
                try:
                    image = _read_image(path)
                except Exception as exc:
                    print(f"warning: skipping {path.name}: {exc}", file=sys.stderr)
                    skipped += 1
                    continue
                if job.kind == "captions":
                    record = _caption_record(model, image, job, path.stem, index, tagger)
                    validate_caption_line(record, eos_token)
                else:
                    record = classprob_line(path.stem, model.class_probs(image))
                    validate_classprob_line(record)
                out.write(json.dumps(record) + "\n")
                written += 1
            if written == 0:
                raise InputError(f"no readable images in {job.images}")
        except BaseException:
            out.close()
            os.unlink(job.out)
            raise
    return ExportStats(written, skipped)
