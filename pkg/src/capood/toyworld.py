"""Synthetic captioned-scene generator.

Scenes are dark 64x64 backgrounds with one or two filled colored shapes.
Captions follow fixed templates; with two objects, mention order is
left-to-right by center column. All randomness flows through one ``Rng``
per dataset, with a documented draw order (background, object count, then
per object shape/color/radius, then positions with bounded retries, then
the template index), so a seed pins the dataset exactly.

The vocabulary covers the full shape inventory, holdout shapes included:
captions about unseen shapes must tokenize without falling back to the
unknown id, so the split stays purely visual.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .images import RasterImage, save_image
from .records import PosLexicon, Vocabulary, write_references
from .rng import Rng

COLORS: dict[str, tuple[int, int, int]] = {
    "red": (220, 40, 40),
    "green": (40, 180, 60),
    "blue": (50, 80, 220),
    "yellow": (230, 210, 50),
    "white": (245, 245, 245),
}

SHAPES = ("circle", "square", "bar", "cross", "ring", "triangle")

FUNCTION_WORDS = ("a", "the", "there", "is", "and", "near")

WORD_POS = {
    "a": "DET",
    "the": "DET",
    "there": "ADV",
    "is": "VERB",
    "and": "OTHER",
    "near": "ADP",
    **{color: "ADJ" for color in COLORS},
    **{shape: "NOUN" for shape in SHAPES},
}


@dataclass(frozen=True)
class ToyWorldConfig:
    size: int = 64
    min_radius: int = 6
    max_radius: int = 10
    margin: int = 2
    count_weights: tuple[float, float] = (0.7, 0.3)
    holdout_shapes: tuple[str, ...] = ("triangle",)

    def __post_init__(self):
        if self.size < 4 * (self.max_radius + self.margin):
            raise ValidationError(
                f"size {self.size} too small for radius {self.max_radius}"
            )
        if not 0 < self.min_radius <= self.max_radius:
            raise ValidationError(
                f"bad radius range {self.min_radius}..{self.max_radius}"
            )
        unknown = set(self.holdout_shapes) - set(SHAPES)
        if unknown:
            raise ValidationError(f"unknown holdout shape(s) {sorted(unknown)}")
        if not self.holdout_shapes or len(set(self.holdout_shapes)) == len(SHAPES):
            raise ValidationError("holdout must leave at least one shape on each side")
        w1, w2 = self.count_weights
        if w1 < 0 or w2 < 0 or w1 + w2 <= 0:
            raise ValidationError(f"bad count weights {self.count_weights}")

    @property
    def train_shapes(self) -> tuple[str, ...]:
        return tuple(s for s in SHAPES if s not in self.holdout_shapes)


@dataclass(frozen=True)
class SceneObject:
    shape: str
    color: str
    cx: int
    cy: int
    radius: int


@dataclass(frozen=True)
class Scene:
    sample_id: str
    objects: tuple[SceneObject, ...]
    caption: tuple[str, ...]
    references: tuple[tuple[str, ...], ...]
    image: RasterImage


def build_vocabulary() -> Vocabulary:
    tokens = ("<bos>", "</s>", "<unk>") + FUNCTION_WORDS + tuple(COLORS) + SHAPES
    return Vocabulary(tokens=tokens, bos_id=0, eos_id=1, unk_id=2)


def build_pos_lexicon() -> PosLexicon:
    return PosLexicon(mapping=dict(WORD_POS))


def _shape_mask(shape: str, cx: int, cy: int, r: int, h: int, w: int) -> np.ndarray:
    yy, xx = np.ogrid[:h, :w]
    dx, dy = xx - cx, yy - cy
    thick = max(1, r // 3)
    if shape == "circle":
        return dx * dx + dy * dy <= r * r
    if shape == "square":
        return (np.abs(dx) <= r) & (np.abs(dy) <= r)
    if shape == "bar":
        return (np.abs(dx) <= r) & (np.abs(dy) <= thick)
    if shape == "cross":
        return ((np.abs(dx) <= thick) & (np.abs(dy) <= r)) | (
            (np.abs(dy) <= thick) & (np.abs(dx) <= r)
        )
    if shape == "ring":
        inner = max(2, (2 * r) // 3)
        d2 = dx * dx + dy * dy
        return (d2 <= r * r) & (d2 >= inner * inner)
    if shape == "triangle":
        return (np.abs(dy) <= r) & (2 * np.abs(dx) <= dy + r)
    raise ValidationError(f"unknown shape {shape!r}")


def render_scene(
    objects: Sequence[SceneObject], background: int, config: ToyWorldConfig
) -> RasterImage:
    px = np.full((config.size, config.size, 3), background, dtype=np.uint8)
    for obj in objects:
        mask = _shape_mask(obj.shape, obj.cx, obj.cy, obj.radius, config.size, config.size)
        px[mask] = COLORS[obj.color]
    return RasterImage(px)


def _one_object_captions(obj: SceneObject) -> tuple[tuple[str, ...], ...]:
    c, s = obj.color, obj.shape
    return (
        ("a", c, s),
        ("there", "is", "a", c, s),
        ("the", s, "is", c),
    )


def _two_object_captions(left: SceneObject, right: SceneObject) -> tuple[tuple[str, ...], ...]:
    c1, s1, c2, s2 = left.color, left.shape, right.color, right.shape
    return (
        ("a", c1, s1, "and", "a", c2, s2),
        ("a", c1, s1, "near", "a", c2, s2),
        ("a", c2, s2, "and", "a", c1, s1),
    )


def caption_templates(objects: Sequence[SceneObject]) -> tuple[tuple[str, ...], ...]:
    """All template realizations for a scene; the sampled caption is one of
    these, and the full tuple doubles as the reference set."""
    ordered = sorted(objects, key=lambda o: o.cx)
    if len(ordered) == 1:
        return _one_object_captions(ordered[0])
    if len(ordered) == 2:
        return _two_object_captions(ordered[0], ordered[1])
    raise ValidationError(f"scenes hold 1 or 2 objects, got {len(ordered)}")


def sample_scene(
    rng: Rng, config: ToyWorldConfig, sample_id: str, holdout: bool = False
) -> Scene:
    pool = config.holdout_shapes if holdout else config.train_shapes
    color_names = tuple(COLORS)
    background = 20 + rng.below(51)
    w1, w2 = config.count_weights
    n_objects = 1 if rng.uniform() * (w1 + w2) < w1 else 2

    picked = [
        (
            pool[rng.below(len(pool))],
            color_names[rng.below(len(color_names))],
            config.min_radius + rng.below(config.max_radius - config.min_radius + 1),
        )
        for _ in range(n_objects)
    ]

    objects: tuple[SceneObject, ...] = ()
    for _ in range(100):
        placed = []
        for shape, color, r in picked:
            lo = r + config.margin
            hi = config.size - 1 - r - config.margin
            cx = lo + rng.below(hi - lo + 1)
            cy = lo + rng.below(hi - lo + 1)
            placed.append(SceneObject(shape, color, cx, cy, r))
        if len(placed) == 1 or abs(placed[0].cx - placed[1].cx) >= (
            placed[0].radius + placed[1].radius + 4
        ):
            objects = tuple(placed)
            break
    if not objects:
        raise ValidationError("could not place objects without overlap")

    references = caption_templates(objects)
    caption = references[rng.below(len(references))]
    return Scene(
        sample_id=sample_id,
        objects=objects,
        caption=caption,
        references=references,
        image=render_scene(objects, background, config),
    )


def generate_dataset(
    config: ToyWorldConfig,
    count: int,
    seed: int,
    holdout: bool = False,
    prefix: str = "toy",
) -> list[Scene]:
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}")
    rng = Rng(seed)
    return [
        sample_scene(rng, config, f"{prefix}_{i:05d}", holdout=holdout)
        for i in range(count)
    ]


def generate_world(
    config: ToyWorldConfig, n_train: int, n_test: int, seed: int
) -> tuple[list[Scene], list[Scene], list[Scene]]:
    """Three disjoint-by-construction splits from one seed: training scenes,
    in-distribution test scenes, and test scenes drawn from the holdout
    shapes only. Each split uses its own derived stream."""
    train = generate_dataset(config, n_train, seed, prefix="train")
    in_test = generate_dataset(config, n_test, seed + 1, prefix="in")
    ood = generate_dataset(config, n_test, seed + 2, holdout=True, prefix="unknown")
    return train, in_test, ood


def encode_caption(words: Sequence[str], vocab: Vocabulary) -> list[int]:
    """Body token ids for a caption (no specials appended)."""
    return [vocab.id_of(word) for word in words]


def write_dataset(
    scenes: Sequence[Scene], image_dir: str | Path, refs_path: str | Path | None = None
) -> None:
    """Images as <sample_id>.ppm plus an optional reference-caption file."""
    image_dir = Path(image_dir)
    image_dir.mkdir(parents=True, exist_ok=True)
    for scene in scenes:
        save_image(scene.image, image_dir / f"{scene.sample_id}.ppm")
    if refs_path is not None:
        write_references(
            {s.sample_id: [list(r) for r in s.references] for s in scenes}, refs_path
        )
