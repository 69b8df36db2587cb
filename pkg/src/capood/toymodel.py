"""Trainable toy captioner: hand-rolled features plus a log-linear
next-token model.

Features (157 raw dimensions, all in [0, 1]):

- 128: coarse color histogram per cell of a 4x4 grid (each channel split
  at one half gives 8 color bins; the value is the fraction of the cell's
  pixels in each bin, so color identity and rough position read off as
  near-indicator features)
-  16: per-cell edge fraction (gradient magnitude above a fixed threshold)
-   8: global gradient-orientation histogram, magnitude-weighted, folded
  to [0, pi) and normalized by total edge mass (scale-free: separates
  axis-aligned shapes from round ones)
-   4: object-mass statistics over the non-background mask (the dark
  background is the only color in the darkest histogram bin, so the mask
  is exact): covered fraction, edge-to-object ratio, bounding-box fill,
  and bounding-box aspect. Fill and aspect are scale-invariant, which is
  what lets a linear model tell a solid square from a thin bar or a holed
  ring regardless of object size.
-   1: global edge fraction

The model input is the raw vector minus the training-set feature mean with
a constant 1 appended (158 dimensions). Two guards keep off-manifold
inputs from extrapolating to confident logits: centering keeps typical
inputs small, and inputs whose centered norm exceeds the largest norm seen
during training are attenuated by (cap/norm)^4, so the farther an input
sits from the training ball the closer its effective features get to zero.
The falloff is gentle just past the boundary (a 5% overshoot keeps 86% of
its norm) and steep far out (2.7x the cap keeps 5%).
Every training input passes through unchanged; a far-away input (say,
pixel noise) drives the model toward its bias-only prior, which reads as a
flat, low-likelihood caption.

Next-token distribution: softmax over W[prev] @ phi, prev being the last
emitted token id (start-of-sequence id before the first). One token of
history plus global image features cannot tell the first mention in a
two-object caption from the second (both condition on "a" and the same
image), so greedy decodes of two-object scenes collapse to one mention or
repeat; single-object scenes are well within reach. Training is
full-batch gradient descent on mean sequence negative log-likelihood plus
an L2 penalty; the per-epoch loss trace records the loss BEFORE each
update, so a zero learning rate yields a constant trace.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .decode import DecodeConfig, DistributionProvider, decode
from .errors import FormatError, TrainingDivergedError, ValidationError
from .images import RasterImage
from .records import Vocabulary
from .rng import uniform_block

GRID = 4
COLOR_BINS = 8
ORIENT_BINS = 8
EDGE_THRESHOLD = 0.08
SHAPE_STATS = 4
RAW_DIM = GRID * GRID * COLOR_BINS + GRID * GRID + ORIENT_BINS + SHAPE_STATS + 1
FEATURE_DIM = RAW_DIM + 1

MODEL_MAGIC = b"CAPTOY1\0"


def _object_stats(mask: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """[covered fraction, edge/object ratio, bbox fill, bbox aspect]."""
    count = int(mask.sum())
    if count == 0:
        return np.zeros(SHAPE_STATS)
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    box_h = rows[-1] - rows[0] + 1
    box_w = cols[-1] - cols[0] + 1
    return np.array(
        [
            count / mask.size,
            min(1.0, float(edges.sum()) / count),
            count / (box_h * box_w),
            box_h / (box_h + box_w),
        ]
    )


def extract_features(img: RasterImage) -> np.ndarray:
    """Raw 157-dimensional feature vector (uncentered, no bias)."""
    px = img.pixels.astype(np.float64) / 255.0
    gray = px.mean(axis=2)
    if img.height > 1 and img.width > 1:
        gy, gx = np.gradient(gray)
    else:
        gy = gx = np.zeros_like(gray)
    mag = np.hypot(gx, gy)
    edges = mag > EDGE_THRESHOLD

    color_idx = (
        (px[..., 0] > 0.5).astype(int) * 4
        + (px[..., 1] > 0.5).astype(int) * 2
        + (px[..., 2] > 0.5).astype(int)
    )

    row_cuts = np.linspace(0, img.height, GRID + 1).astype(int)
    col_cuts = np.linspace(0, img.width, GRID + 1).astype(int)
    cell_colors = np.empty((GRID, GRID, COLOR_BINS))
    cell_edge = np.empty((GRID, GRID))
    for i in range(GRID):
        for j in range(GRID):
            rows = slice(row_cuts[i], row_cuts[i + 1])
            cols = slice(col_cuts[j], col_cuts[j + 1])
            block = color_idx[rows, cols]
            cell_colors[i, j] = np.bincount(
                block.ravel(), minlength=COLOR_BINS
            ) / max(block.size, 1)
            cell_edge[i, j] = edges[rows, cols].mean() if block.size else 0.0

    angles = np.mod(np.arctan2(gy, gx), np.pi)
    angle_bins = np.minimum(
        (angles / (np.pi / ORIENT_BINS)).astype(int), ORIENT_BINS - 1
    )
    orient = np.bincount(
        angle_bins.ravel(), weights=mag.ravel(), minlength=ORIENT_BINS
    )
    orient = orient / (orient.sum() + 1e-12)

    return np.concatenate(
        [
            cell_colors.ravel(),
            cell_edge.ravel(),
            orient,
            _object_stats(color_idx != 0, edges),
            [float(edges.mean())],
        ]
    )


@dataclass(frozen=True)
class ToyCaptionModel:
    weights: np.ndarray
    feature_mean: np.ndarray
    norm_cap: float = math.inf

    def __post_init__(self):
        w, m = self.weights, self.feature_mean
        if w.ndim != 3 or w.shape[0] != w.shape[1]:
            raise ValidationError(f"weights must be (V, V, F), got {w.shape}")
        if m.shape != (w.shape[2] - 1,):
            raise ValidationError(
                f"feature mean shape {m.shape} does not match weights {w.shape}"
            )
        if not (np.isfinite(w).all() and np.isfinite(m).all()):
            raise ValidationError("model parameters must be finite")
        if not self.norm_cap > 0:
            raise ValidationError(f"norm cap must be positive, got {self.norm_cap}")

    @property
    def vocab_size(self) -> int:
        return self.weights.shape[0]

    def input_vector(self, raw: np.ndarray) -> np.ndarray:
        centered = raw - self.feature_mean
        norm = float(np.linalg.norm(centered))
        if norm > self.norm_cap:
            centered = centered * (self.norm_cap / norm) ** 4
        return np.concatenate([centered, [1.0]])

    def next_distribution(self, prev_token: int, phi: np.ndarray) -> np.ndarray:
        logits = self.weights[prev_token] @ phi
        logits = logits - logits.max()
        probs = np.exp(logits)
        return probs / probs.sum()

    def save(self, path: str | Path) -> None:
        header = json.dumps(
            {
                "vocab_size": self.vocab_size,
                "feature_dim": self.weights.shape[2],
                "raw_dim": self.feature_mean.shape[0],
                "norm_cap": None if math.isinf(self.norm_cap) else self.norm_cap,
            }
        ).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(MODEL_MAGIC)
            fh.write(struct.pack("<Q", len(header)))
            fh.write(header)
            fh.write(self.feature_mean.astype("<f8").tobytes())
            fh.write(self.weights.astype("<f8").tobytes())


def load_model(path: str | Path) -> ToyCaptionModel:
    blob = Path(path).read_bytes()
    if blob[: len(MODEL_MAGIC)] != MODEL_MAGIC:
        raise FormatError(f"{path}: not a model file (bad magic)")
    offset = len(MODEL_MAGIC)
    (header_len,) = struct.unpack_from("<Q", blob, offset)
    offset += 8
    try:
        header = json.loads(blob[offset : offset + header_len])
        v, f, raw = header["vocab_size"], header["feature_dim"], header["raw_dim"]
        cap = header.get("norm_cap")
        norm_cap = math.inf if cap is None else float(cap)
    except (ValueError, KeyError) as exc:
        raise FormatError(f"{path}: malformed model header ({exc!r})") from exc
    offset += header_len
    expected = offset + 8 * (raw + v * v * f)
    if len(blob) != expected:
        raise FormatError(
            f"{path}: payload is {len(blob)} bytes, header implies {expected}"
        )
    mean = np.frombuffer(blob, dtype="<f8", count=raw, offset=offset)
    offset += 8 * raw
    weights = np.frombuffer(blob, dtype="<f8", count=v * v * f, offset=offset)
    return ToyCaptionModel(weights.reshape(v, v, f).copy(), mean.copy(), norm_cap)


class ModelProvider(DistributionProvider):
    """Per-image adapter between a trained model and the decoders."""

    def __init__(self, model: ToyCaptionModel, vocab: Vocabulary, raw_features: np.ndarray):
        if model.vocab_size != len(vocab.tokens):
            raise ValidationError(
                f"model vocab size {model.vocab_size} != vocabulary {len(vocab.tokens)}"
            )
        self._model = model
        self._bos = vocab.bos_id
        self._phi = model.input_vector(np.asarray(raw_features, dtype=np.float64))

    def next_distribution(self, prefix: Sequence[int]) -> np.ndarray:
        prev = prefix[-1] if prefix else self._bos
        return self._model.next_distribution(prev, self._phi)


def caption_image(
    model: ToyCaptionModel,
    vocab: Vocabulary,
    img: RasterImage,
    config: DecodeConfig,
    sample_id: str = "sample",
    set_id: str = "default",
):
    """Decode a caption for an image: features, provider, then the decoder.

    Returns the decoder's ``ScoredCaption`` with per-token log-probabilities.
    """
    provider = ModelProvider(model, vocab, extract_features(img))
    return decode(provider, vocab, config, sample_id=sample_id, set_id=set_id)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1500
    learning_rate: float = 10.0
    l2: float = 1e-4
    init_scale: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate < 0:
            raise ValidationError(f"learning rate must be >= 0, got {self.learning_rate}")
        if self.l2 < 0:
            raise ValidationError(f"l2 must be >= 0, got {self.l2}")
        if self.init_scale < 0:
            raise ValidationError(f"init scale must be >= 0, got {self.init_scale}")


def init_weights(vocab_size: int, feature_dim: int, seed: int, scale: float) -> np.ndarray:
    flat = uniform_block(seed, vocab_size * vocab_size * feature_dim)
    return (flat * 2.0 - 1.0).reshape(vocab_size, vocab_size, feature_dim) * scale


def transitions_from_sequences(
    raw_features: Sequence[np.ndarray],
    token_bodies: Sequence[Sequence[int]],
    vocab: Vocabulary,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flatten (image, body-ids) pairs into per-step training rows.

    Returns (raw feature rows, prev ids, next ids); each caption contributes
    len(body)+1 rows, the last predicting the end token.
    """
    if len(raw_features) != len(token_bodies):
        raise ValidationError("feature and caption counts differ")
    if not raw_features:
        raise ValidationError("training set is empty")
    rows, prevs, nexts = [], [], []
    for raw, body in zip(raw_features, token_bodies):
        path = [vocab.bos_id, *body, vocab.eos_id]
        for prev, nxt in zip(path, path[1:]):
            rows.append(raw)
            prevs.append(prev)
            nexts.append(nxt)
    return (
        np.asarray(rows, dtype=np.float64),
        np.asarray(prevs, dtype=np.int64),
        np.asarray(nexts, dtype=np.int64),
    )


def _grouped(prevs: np.ndarray) -> list[tuple[int, np.ndarray]]:
    return [(int(p), np.flatnonzero(prevs == p)) for p in np.unique(prevs)]


def nll_loss(
    weights: np.ndarray,
    inputs: np.ndarray,
    prevs: np.ndarray,
    nexts: np.ndarray,
    l2: float,
) -> float:
    """Mean per-step negative log-likelihood plus l2 * sum(weights^2)."""
    total = 0.0
    for prev, idx in _grouped(prevs):
        logits = inputs[idx] @ weights[prev].T
        shifted = logits - logits.max(axis=1, keepdims=True)
        logz = np.log(np.exp(shifted).sum(axis=1)) + logits.max(axis=1)
        total += float((logz - logits[np.arange(len(idx)), nexts[idx]]).sum())
    return total / len(prevs) + l2 * float((weights * weights).sum())


def nll_gradient(
    weights: np.ndarray,
    inputs: np.ndarray,
    prevs: np.ndarray,
    nexts: np.ndarray,
    l2: float,
) -> np.ndarray:
    return _loss_and_gradient(weights, inputs, prevs, nexts, l2)[1]


def _loss_and_gradient(
    weights: np.ndarray,
    inputs: np.ndarray,
    prevs: np.ndarray,
    nexts: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray]:
    """One fused pass; the loss and the gradient share the same softmaxes."""
    total = 0.0
    grad = 2.0 * l2 * weights.copy()
    n = len(prevs)
    for prev, idx in _grouped(prevs):
        logits = inputs[idx] @ weights[prev].T
        top = logits.max(axis=1, keepdims=True)
        expl = np.exp(logits - top)
        z = expl.sum(axis=1, keepdims=True)
        rows = np.arange(len(idx))
        total += float(
            (np.log(z[:, 0]) + top[:, 0] - logits[rows, nexts[idx]]).sum()
        )
        soft = expl / z
        soft[rows, nexts[idx]] -= 1.0
        grad[prev] += soft.T @ inputs[idx] / n
    loss = total / n + l2 * float((weights * weights).sum())
    return loss, grad


def train_model(
    raw_features: Sequence[np.ndarray],
    token_bodies: Sequence[Sequence[int]],
    vocab: Vocabulary,
    config: TrainConfig = TrainConfig(),
) -> tuple[ToyCaptionModel, list[float]]:
    """Fit the captioner; returns the model and the pre-update loss trace."""
    rows, prevs, nexts = transitions_from_sequences(raw_features, token_bodies, vocab)
    mean = rows.mean(axis=0)
    centered = rows - mean
    norm_cap = float(np.linalg.norm(centered, axis=1).max())
    inputs = np.concatenate([centered, np.ones((len(rows), 1))], axis=1)
    v = len(vocab.tokens)
    weights = init_weights(v, FEATURE_DIM, config.seed, config.init_scale)

    trace: list[float] = []
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(config.epochs):
            loss, grad = _loss_and_gradient(weights, inputs, prevs, nexts, config.l2)
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, loss)
            trace.append(loss)
            weights = weights - config.learning_rate * grad
    if not np.isfinite(weights).all():
        raise TrainingDivergedError(config.epochs, float("nan"))
    return ToyCaptionModel(weights, mean, norm_cap), trace
