"""Manifest-driven detection experiments: one IN set against any number of
OOD sets, producing per-set detection reports, an aggregate over the union
of the OOD sets, score lines, a CSV table, and SVG figures.

A manifest is a JSON file. Each set names either a token-record JSONL file
("records") or a directory of images to decode here ("images"); image sets
need the manifest's "model" (a trained captioner file) and are decoded with
the manifest's decode settings. Scoring mode is manifest-wide: "captions"
collapses each caption's token logprobs under the score settings, and
"classprobs" reads class-probability lines and scores by max softmax
probability. One mode for every set in the experiment, so an IN group can
never be compared against an OOD group measured on a different scale.

All randomness is pinned by manifest fields (the decode seed); a rerun
writes byte-identical outputs. The aggregate row scores the IN group
against the concatenation of all OOD scores, each set unweighted.

Outputs in ``out_dir``:

- ``scores.jsonl``   every sample's score line (IN set first, then each OOD
                     set in manifest order)
- ``report.csv``     one row per OOD set plus the ``all`` aggregate
- ``report.jsonl``   the same reports as JSON objects, one per line
- ``{set}_hist.svg`` score-histogram overlay per comparison (and ``all_*``)
- ``{set}_roc.svg``  ROC plot per comparison
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .decode import DecodeConfig, decode
from .detmetrics import DEFAULT_BINS, DetectionReport, ScoreGroup, detection_report
from .errors import FormatError, ValidationError
from .images import load_image
from .plots import roc_svg, score_histogram_svg
from .records import (
    SampleScore,
    Vocabulary,
    load_class_probs,
    load_records,
    write_scores,
)
from .score import ScoreConfig, msp_scores, score_captions
from .toymodel import ModelProvider, extract_features, load_model

AGGREGATE_NAME = "all"
SCORE_KINDS = ("captions", "classprobs")
IMAGE_SUFFIXES = (".png", ".ppm")

_NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


@dataclass(frozen=True)
class SetSpec:
    """One named sample set: a records file or an image directory."""

    name: str
    records: str | None = None
    images: str | None = None

    def __post_init__(self):
        if not _NAME_RE.match(self.name):
            raise ValidationError(
                f"set name {self.name!r} must be alphanumeric with ._- only"
            )
        if self.name == AGGREGATE_NAME:
            raise ValidationError(
                f"set name {AGGREGATE_NAME!r} is reserved for the aggregate row"
            )
        if (self.records is None) == (self.images is None):
            raise ValidationError(
                f"set {self.name!r} needs exactly one of 'records' or 'images'"
            )

    @classmethod
    def from_json(cls, obj: Mapping) -> "SetSpec":
        known = {"name", "records", "images"}
        extra = set(obj) - known
        if extra:
            raise ValidationError(f"unknown set keys: {sorted(extra)}")
        if "name" not in obj:
            raise ValidationError("set object needs a 'name'")
        return cls(**obj)

    def to_json(self) -> dict:
        entry: dict = {"name": self.name}
        if self.records is not None:
            entry["records"] = self.records
        if self.images is not None:
            entry["images"] = self.images
        return entry


@dataclass(frozen=True)
class ExperimentManifest:
    """Everything one experiment needs, with every seed in plain sight."""

    in_set: SetSpec
    ood_sets: tuple[SetSpec, ...]
    vocab: str
    out_dir: str
    score_kind: str = "captions"
    score: ScoreConfig = field(default_factory=ScoreConfig)
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    bins: int = DEFAULT_BINS
    model: str | None = None

    def __post_init__(self):
        if not self.ood_sets:
            raise ValidationError("need at least one OOD set")
        names = [self.in_set.name] + [s.name for s in self.ood_sets]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise ValidationError(f"duplicate set names: {sorted(dupes)}")
        if self.score_kind not in SCORE_KINDS:
            raise ValidationError(
                f"score_kind must be one of {SCORE_KINDS}, got {self.score_kind!r}"
            )
        if self.bins < 2:
            raise ValidationError(f"bins must be >= 2, got {self.bins}")
        image_sets = [s.name for s in (self.in_set, *self.ood_sets) if s.images]
        if image_sets and self.model is None:
            raise ValidationError(
                f"image sets {image_sets} need a 'model' to decode with"
            )
        if image_sets and self.score_kind != "captions":
            raise ValidationError(
                "image sets produce captions; score_kind must be 'captions'"
            )

    @classmethod
    def from_json(cls, obj: Mapping) -> "ExperimentManifest":
        known = {
            "in_set",
            "ood_sets",
            "vocab",
            "out_dir",
            "score_kind",
            "score",
            "decode",
            "bins",
            "model",
        }
        extra = set(obj) - known
        if extra:
            raise ValidationError(f"unknown manifest keys: {sorted(extra)}")
        missing = {"in_set", "ood_sets", "vocab", "out_dir"} - set(obj)
        if missing:
            raise ValidationError(f"manifest missing keys: {sorted(missing)}")
        kwargs: dict = {
            "in_set": SetSpec.from_json(obj["in_set"]),
            "ood_sets": tuple(SetSpec.from_json(s) for s in obj["ood_sets"]),
            "vocab": obj["vocab"],
            "out_dir": obj["out_dir"],
        }
        if "score_kind" in obj:
            kwargs["score_kind"] = obj["score_kind"]
        if "score" in obj:
            known_score = {"normalization", "include_eos"}
            extra = set(obj["score"]) - known_score
            if extra:
                raise ValidationError(f"unknown score config keys: {sorted(extra)}")
            kwargs["score"] = ScoreConfig(**obj["score"])
        if "decode" in obj:
            kwargs["decode"] = DecodeConfig.from_json(obj["decode"])
        if "bins" in obj:
            kwargs["bins"] = int(obj["bins"])
        if "model" in obj:
            kwargs["model"] = obj["model"]
        return cls(**kwargs)

    def to_json(self) -> dict:
        entry: dict = {
            "in_set": self.in_set.to_json(),
            "ood_sets": [s.to_json() for s in self.ood_sets],
            "vocab": self.vocab,
            "out_dir": self.out_dir,
            "score_kind": self.score_kind,
            "score": {
                "normalization": self.score.normalization,
                "include_eos": self.score.include_eos,
            },
            "decode": self.decode.to_json(),
            "bins": self.bins,
        }
        if self.model is not None:
            entry["model"] = self.model
        return entry

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8"
        )

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentManifest":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc}", path=str(path)) from exc
        if not isinstance(obj, Mapping):
            raise FormatError("manifest is not a JSON object", path=str(path))
        return cls.from_json(obj)


@dataclass(frozen=True)
class ExperimentResult:
    """Reports in manifest order with the aggregate last, all score lines,
    and the paths written."""

    reports: tuple[DetectionReport, ...]
    scores: tuple[SampleScore, ...]
    files: tuple[str, ...]

    def report(self, name: str) -> DetectionReport:
        for rep in self.reports:
            if rep.name == name:
                return rep
        raise ValidationError(f"no report named {name!r}")


def _decode_directory(
    images_dir: str, set_name: str, model, vocab: Vocabulary, config: DecodeConfig
):
    root = Path(images_dir)
    if not root.is_dir():
        raise ValidationError(f"set {set_name!r}: {images_dir!r} is not a directory")
    paths = sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not paths:
        raise ValidationError(f"set {set_name!r}: no images in {images_dir!r}")
    captions = []
    for path in paths:
        provider = ModelProvider(model, vocab, extract_features(load_image(path)))
        captions.append(
            decode(provider, vocab, config, sample_id=path.stem, set_id=set_name)
        )
    return captions


def _set_scores(
    spec: SetSpec,
    label: str,
    manifest: ExperimentManifest,
    vocab: Vocabulary,
    model,
) -> list[SampleScore]:
    if manifest.score_kind == "classprobs":
        return msp_scores(load_class_probs(spec.records), spec.name, label)
    if spec.records is not None:
        captions = load_records(spec.records, vocab)
    else:
        captions = _decode_directory(spec.images, spec.name, model, vocab, manifest.decode)
    scored = score_captions(captions, label, manifest.score)
    # The manifest name identifies the group from here on, whatever set_id
    # the records file carried.
    return [
        SampleScore(s.sample_id, spec.name, s.score, s.label) for s in scored
    ]


def _csv_value(value) -> str:
    if isinstance(value, float):
        return "inf" if value == float("inf") else repr(value)
    return str(value)


def report_csv(reports: Sequence[DetectionReport], normalization: str) -> str:
    """The report table: one row per comparison, floats written exactly
    (shortest round-trip form), infinite BD spelled ``inf``."""
    header = "name,n_in,n_out,auroc,aupr_in,aupr_out,bd,bins,normalization"
    lines = [header]
    for rep in reports:
        lines.append(
            ",".join(
                [
                    rep.name,
                    str(rep.n_in),
                    str(rep.n_out),
                    _csv_value(rep.auroc),
                    _csv_value(rep.aupr_in),
                    _csv_value(rep.aupr_out),
                    _csv_value(rep.bd),
                    str(rep.bins),
                    normalization,
                ]
            )
        )
    return "\n".join(lines) + "\n"


def run_experiment(manifest: ExperimentManifest) -> ExperimentResult:
    """Score every set, compare each OOD set (and their union) against the
    IN set, and write scores, reports, and figures to the output directory.
    """
    vocab = Vocabulary.load(manifest.vocab)
    model = load_model(manifest.model) if manifest.model is not None else None

    in_scores = _set_scores(manifest.in_set, "IN", manifest, vocab, model)
    per_set: list[tuple[SetSpec, list[SampleScore]]] = [
        (spec, _set_scores(spec, "OUT", manifest, vocab, model))
        for spec in manifest.ood_sets
    ]

    in_values = tuple(s.score for s in in_scores)
    reports = []
    for spec, scores in per_set:
        group = ScoreGroup(in_values, tuple(s.score for s in scores))
        reports.append(detection_report(group, bins=manifest.bins, name=spec.name))
    pooled = tuple(s.score for _, scores in per_set for s in scores)
    aggregate = detection_report(
        ScoreGroup(in_values, pooled), bins=manifest.bins, name=AGGREGATE_NAME
    )
    reports.append(aggregate)

    normalization = (
        "msp" if manifest.score_kind == "classprobs" else manifest.score.normalization
    )
    out_dir = Path(manifest.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[str] = []

    all_scores = list(in_scores) + [s for _, scores in per_set for s in scores]
    scores_path = out_dir / "scores.jsonl"
    write_scores(all_scores, scores_path)
    written.append(str(scores_path))

    csv_path = out_dir / "report.csv"
    csv_path.write_text(report_csv(reports, normalization), encoding="utf-8")
    written.append(str(csv_path))

    jsonl_path = out_dir / "report.jsonl"
    with open(jsonl_path, "w", encoding="utf-8") as fh:
        for rep in reports:
            fh.write(json.dumps(rep.to_json()) + "\n")
    written.append(str(jsonl_path))

    groups = {spec.name: scores for spec, scores in per_set}
    groups[AGGREGATE_NAME] = [
        s for _, scores in per_set for s in scores
    ]
    for rep in reports:
        out_values = [s.score for s in groups[rep.name]]
        hist_path = out_dir / f"{rep.name}_hist.svg"
        hist_path.write_text(
            score_histogram_svg(
                in_values,
                out_values,
                bins=manifest.bins,
                title=f"{rep.name}: score histograms",
            ),
            encoding="utf-8",
        )
        written.append(str(hist_path))
        roc_path = out_dir / f"{rep.name}_roc.svg"
        roc_path.write_text(
            roc_svg(rep.roc_points, title=f"{rep.name}: ROC (AUROC={rep.auroc:.3f})"),
            encoding="utf-8",
        )
        written.append(str(roc_path))

    return ExperimentResult(tuple(reports), tuple(all_scores), tuple(written))
