"""Command-line surface over the toolkit's file formats.

Subcommands cover the full pipeline: ``toy-gen`` writes a synthetic world,
``toy-train`` fits the captioner, ``corrupt`` derives corrupted image sets,
``decode`` turns images into token-record lines, ``score`` turns records
into score lines, ``detect`` compares score files, ``report`` runs a whole
manifest, and ``quality`` tabulates BLEU-4/ROUGE-L against references.

Exit codes: 0 on success, 2 when inputs fail validation (bad parameters,
malformed files), 3 on any other runtime failure. All randomness enters
through explicit ``--seed`` flags or manifest fields.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corrupt import KINDS, CorruptionSpec, corrupt_directory, write_corruption_manifest
from .capmetrics import bleu4, rouge_l
from .decode import DecodeConfig, decode
from .detmetrics import DEFAULT_BINS, ScoreGroup, detection_report
from .errors import ValidationError
from .experiment import ExperimentManifest, report_csv, run_experiment
from .images import load_image
from .records import (
    SampleScore,
    Vocabulary,
    load_class_probs,
    load_records,
    load_references,
    load_scores,
    write_records,
    write_references,
    write_scores,
)
from .plots import roc_svg, score_histogram_svg
from .score import ScoreConfig, msp_scores, score_captions
from .toymodel import (
    ModelProvider,
    TrainConfig,
    extract_features,
    load_model,
    train_model,
)
from .toyworld import (
    SHAPES,
    ToyWorldConfig,
    build_pos_lexicon,
    build_vocabulary,
    encode_caption,
    generate_world,
    write_dataset,
)

IMAGE_SUFFIXES = (".png", ".ppm")


def _image_paths(directory: str) -> list[Path]:
    root = Path(directory)
    if not root.is_dir():
        raise ValidationError(f"{directory!r} is not a directory")
    paths = sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not paths:
        raise ValidationError(f"no .png or .ppm files in {directory!r}")
    return paths


def _parse_param(text: str):
    name, sep, value = text.partition("=")
    if not sep or not name:
        raise ValidationError(f"expected NAME=VALUE, got {text!r}")
    try:
        return name, json.loads(value)
    except json.JSONDecodeError:
        raise ValidationError(
            f"parameter {name!r} needs a numeric value, got {value!r}"
        ) from None


def cmd_corrupt(args) -> int:
    params = dict(_parse_param(p) for p in args.param)
    spec = CorruptionSpec(kind=args.kind, seed=args.seed, params=params)
    entries = list(corrupt_directory(args.src, args.dst, spec))
    write_corruption_manifest(entries, Path(args.dst) / "manifest.jsonl")
    print(f"corrupted {len(entries)} image(s) into {args.dst} [{spec.kind}]")
    return 0


def cmd_toy_gen(args) -> int:
    config = ToyWorldConfig(
        size=args.size,
        holdout_shapes=tuple(args.holdout),
        count_weights=tuple(args.count_weights),
    )
    train, test_in, test_ood = generate_world(
        config, args.n_train, args.n_test, seed=args.seed
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    build_vocabulary().save(out / "vocab.json")
    build_pos_lexicon().save(out / "lexicon.tsv")
    write_dataset(train, out / "train")
    # The sampled caption is the MLE target; a single-reference file reuses
    # the references format.
    write_references(
        {s.sample_id: [list(s.caption)] for s in train}, out / "train_captions.jsonl"
    )
    write_dataset(test_in, out / "in", out / "in_refs.jsonl")
    write_dataset(test_ood, out / "unknown", out / "unknown_refs.jsonl")
    print(
        f"wrote {len(train)} train / {len(test_in)} in / {len(test_ood)} unknown"
        f" scenes under {out}"
    )
    return 0


def cmd_toy_train(args) -> int:
    vocab = Vocabulary.load(args.vocab)
    refs = load_references(args.captions)
    features = []
    bodies = []
    for path in _image_paths(args.images):
        if path.stem not in refs:
            raise ValidationError(f"no caption for image {path.name!r}")
        if len(refs[path.stem]) != 1:
            raise ValidationError(
                f"image {path.name!r} needs exactly one training caption,"
                f" got {len(refs[path.stem])}"
            )
        (caption,) = refs[path.stem]
        features.append(extract_features(load_image(path)))
        bodies.append(encode_caption(caption, vocab))
    config = TrainConfig(
        epochs=args.epochs,
        learning_rate=args.lr,
        l2=args.l2,
        seed=args.seed,
    )
    model, trace = train_model(features, bodies, vocab, config)
    model.save(args.out)
    if args.trace:
        Path(args.trace).write_text(
            "".join(f"{v!r}\n" for v in trace), encoding="utf-8"
        )
    print(
        f"trained on {len(bodies)} captions for {config.epochs} epochs:"
        f" nll {trace[0]:.4f} -> {trace[-1]:.4f}; saved {args.out}"
    )
    return 0


def cmd_decode(args) -> int:
    vocab = Vocabulary.load(args.vocab)
    model = load_model(args.model)
    config = DecodeConfig.parse(args.strategy, max_len=args.max_len, seed=args.seed)
    captions = []
    for path in _image_paths(args.images):
        provider = ModelProvider(model, vocab, extract_features(load_image(path)))
        captions.append(
            decode(provider, vocab, config, sample_id=path.stem, set_id=args.set_id)
        )
    write_records(captions, args.out, vocab)
    print(f"decoded {len(captions)} image(s) -> {args.out}")
    return 0


def cmd_score(args) -> int:
    if args.classprobs:
        samples = msp_scores(load_class_probs(args.records), args.set_id, args.label)
    else:
        vocab = Vocabulary.load(args.vocab)
        config = ScoreConfig(
            normalization=args.normalization, include_eos=not args.exclude_eos
        )
        captions = load_records(args.records, vocab)
        samples = [
            SampleScore(s.sample_id, args.set_id, s.score, s.label)
            for s in score_captions(captions, args.label, config)
        ]
    write_scores(samples, args.out)
    print(f"scored {len(samples)} sample(s) -> {args.out}")
    return 0


def cmd_detect(args) -> int:
    samples = []
    for path in args.scores:
        samples.extend(load_scores(path))
    group = ScoreGroup.from_samples(samples)
    report = detection_report(group, bins=args.bins, name=args.name)
    sys.stdout.write(report_csv([report], args.normalization))
    if args.plots:
        plots_dir = Path(args.plots)
        plots_dir.mkdir(parents=True, exist_ok=True)
        (plots_dir / f"{args.name}_hist.svg").write_text(
            score_histogram_svg(
                group.in_scores,
                group.out_scores,
                bins=args.bins,
                title=f"{args.name}: score histograms",
            ),
            encoding="utf-8",
        )
        (plots_dir / f"{args.name}_roc.svg").write_text(
            roc_svg(
                report.roc_points,
                title=f"{args.name}: ROC (AUROC={report.auroc:.3f})",
            ),
            encoding="utf-8",
        )
    return 0


def cmd_report(args) -> int:
    manifest = ExperimentManifest.load(args.manifest)
    result = run_experiment(manifest)
    normalization = (
        "msp" if manifest.score_kind == "classprobs" else manifest.score.normalization
    )
    sys.stdout.write(report_csv(result.reports, normalization))
    return 0


def cmd_quality(args) -> int:
    vocab = Vocabulary.load(args.vocab)
    refs = load_references(args.refs)
    print("name,bleu4,rouge_l")
    for path in args.records:
        captions = load_records(path, vocab)
        candidates = {c.sample_id: c.words(vocab) for c in captions}
        b = bleu4(candidates, refs)
        r = rouge_l(candidates, refs)
        print(f"{Path(path).stem},{b!r},{r!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capood",
        description="Caption-likelihood out-of-distribution detection toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corrupt", help="corrupt every image in a directory")
    p.add_argument("src", help="directory of .png/.ppm images")
    p.add_argument("dst", help="output directory (manifest.jsonl written here)")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--param",
        action="append",
        default=[],
        metavar="NAME=VALUE",
        help="override a default parameter, e.g. --param quality=10",
    )
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("toy-gen", help="generate the synthetic caption world")
    p.add_argument("out", help="output directory")
    p.add_argument("--n-train", type=int, default=2000)
    p.add_argument("--n-test", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=64)
    p.add_argument(
        "--holdout",
        nargs="+",
        default=["triangle"],
        metavar="SHAPE",
        help=f"shapes kept out of training (from: {', '.join(SHAPES)})",
    )
    p.add_argument(
        "--count-weights",
        nargs=2,
        type=float,
        default=[0.7, 0.3],
        metavar=("W1", "W2"),
        help="relative weights of one- and two-object scenes",
    )
    p.set_defaults(func=cmd_toy_gen)

    p = sub.add_parser("toy-train", help="train the toy captioner")
    p.add_argument("--images", required=True, help="training image directory")
    p.add_argument(
        "--captions", required=True, help="single-reference captions JSONL"
    )
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--epochs", type=int, default=TrainConfig.epochs)
    p.add_argument("--lr", type=float, default=TrainConfig.learning_rate)
    p.add_argument("--l2", type=float, default=TrainConfig.l2)
    p.add_argument("--seed", type=int, default=TrainConfig.seed)
    p.add_argument("--trace", help="optional file for the per-epoch loss trace")
    p.set_defaults(func=cmd_toy_train)

    p = sub.add_parser("decode", help="caption a directory of images")
    p.add_argument("--model", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True, help="token-record JSONL to write")
    p.add_argument("--set-id", default="default")
    p.add_argument(
        "--strategy",
        default="greedy",
        help="greedy, beam:K, topk:K, or nucleus:P",
    )
    p.add_argument("--max-len", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("score", help="collapse records to score lines")
    p.add_argument("--records", required=True, help="token-record (or class-prob) JSONL")
    p.add_argument("--vocab", help="required for token records")
    p.add_argument("--out", required=True)
    p.add_argument("--set-id", default="default")
    p.add_argument("--label", required=True, choices=("IN", "OUT"))
    p.add_argument("--normalization", default="sum", choices=("sum", "mean"))
    p.add_argument(
        "--exclude-eos",
        action="store_true",
        help="drop the end-token record from each caption's score",
    )
    p.add_argument(
        "--classprobs",
        action="store_true",
        help="treat --records as class-probability lines and score by max softmax",
    )
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("detect", help="detection report from score files")
    p.add_argument("scores", nargs="+", help="score JSONL files (labels inside)")
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--name", default="detect")
    p.add_argument("--normalization", default="sum", help="label for the report row")
    p.add_argument("--plots", help="directory for histogram and ROC SVGs")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("report", help="run an experiment manifest")
    p.add_argument("manifest", help="experiment manifest JSON")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("quality", help="BLEU-4/ROUGE-L table against references")
    p.add_argument("records", nargs="+", help="token-record JSONL files")
    p.add_argument("--vocab", required=True)
    p.add_argument("--refs", required=True, help="references JSONL")
    p.set_defaults(func=cmd_quality)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "score" and not args.classprobs and not args.vocab:
        parser.error("score: --vocab is required unless --classprobs is given")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures: missing files, diverged training
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
