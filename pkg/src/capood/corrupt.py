"""Seeded image corruptions.

Every corruption is a pure function of (pixels, parameters, seed): the seed
drives the shared splitmix64 counter stream, so outputs are bit-identical
across runs and platforms. Draw accounting is part of each function's
contract and documented inline.

Kinds and defaults:

- ``salt_pepper`` (p=0.1): each pixel independently becomes black or white
  (equal odds) with probability p, all channels together.
- ``jpeg`` (quality=10): block-DCT quantization, see ``jpegdct``.
- ``snow`` (density=0.3, blur_radius=2, brightness_lift=0.2): white discs of
  radius 1..3, box-blurred into flakes, alpha-composited, then a global
  brightness lift toward white.
- ``cartoon`` (levels=6, smooth_iters=3, edge_threshold=0.25): iterated
  edge-preserving range filtering, uniform color quantization to ``levels``
  per channel, Sobel edges at or above the threshold painted black. No RNG.

``random_noise_image`` makes iid uniform-byte images (an OOD set of its
own, not a corruption of an input), and ``crop_bbox`` cuts out a region.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from .errors import ValidationError
from .images import RasterImage, load_image, save_image
from .jpegdct import jpeg_corrupt
from .rng import byte_block, mix64, uniform_block

KINDS = ("salt_pepper", "jpeg", "snow", "cartoon")

DEFAULT_PARAMS: dict[str, dict[str, float]] = {
    "salt_pepper": {"p": 0.1},
    "jpeg": {"quality": 10},
    "snow": {"density": 0.3, "blur_radius": 2, "brightness_lift": 0.2},
    "cartoon": {"levels": 6, "smooth_iters": 3, "edge_threshold": 0.25},
}

# Range-Gaussian width for cartoon smoothing, on the 0..255 channel scale.
CARTOON_SIGMA = 30.0


def salt_pepper(img: RasterImage, p: float = 0.1, seed: int = 0) -> RasterImage:
    """Impulse noise: one uniform per pixel (row-major order); u < p/2 turns
    the pixel black, p/2 <= u < p turns it white."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"p must be in [0, 1], got {p}")
    h, w = img.height, img.width
    u = uniform_block(seed, h * w).reshape(h, w)
    out = img.pixels.copy()
    out[u < p / 2.0] = 0
    out[(u >= p / 2.0) & (u < p)] = 255
    return RasterImage(out)


def _box_blur(mask: np.ndarray, radius: int) -> np.ndarray:
    """Uniform (2r+1)^2 blur with edge-replicated borders, via summed areas."""
    if radius == 0:
        return mask
    k = 2 * radius + 1
    padded = np.pad(mask, radius, mode="edge")
    integral = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1))
    integral[1:, 1:] = np.cumsum(np.cumsum(padded, axis=0), axis=1)
    h, w = mask.shape
    out = (
        integral[k : k + h, k : k + w]
        - integral[:h, k : k + w]
        - integral[k : k + h, :w]
        + integral[:h, :w]
    )
    return out / (k * k)


def snow_corrupt(
    img: RasterImage,
    density: float = 0.3,
    blur_radius: int = 2,
    brightness_lift: float = 0.2,
    seed: int = 0,
) -> RasterImage:
    """Snow: flake count round(density * h * w / 64); per flake three draws
    in order (cx, cy, radius-1), radius uniform on {1, 2, 3}."""
    if density < 0.0:
        raise ValidationError(f"density must be >= 0, got {density}")
    if blur_radius < 0:
        raise ValidationError(f"blur_radius must be >= 0, got {blur_radius}")
    if not 0.0 <= brightness_lift <= 1.0:
        raise ValidationError(f"brightness_lift must be in [0, 1], got {brightness_lift}")
    h, w = img.height, img.width
    n_flakes = max(1, int(round(density * h * w / 64.0))) if density > 0 else 0

    mask = np.zeros((h, w), dtype=np.float64)
    if n_flakes:
        u = uniform_block(seed, 3 * n_flakes)
        cxs = np.minimum((u[0::3] * w).astype(np.int64), w - 1)
        cys = np.minimum((u[1::3] * h).astype(np.int64), h - 1)
        radii = 1 + np.minimum((u[2::3] * 3).astype(np.int64), 2)
        for cx, cy, r in zip(cxs, cys, radii):
            x0, x1 = max(0, cx - r), min(w, cx + r + 1)
            y0, y1 = max(0, cy - r), min(h, cy + r + 1)
            yy, xx = np.ogrid[y0:y1, x0:x1]
            patch = (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
            mask[y0:y1, x0:x1][patch] = 1.0

    alpha = np.clip(_box_blur(mask, blur_radius), 0.0, 1.0)[..., None]
    out = img.pixels.astype(np.float64) * (1.0 - alpha) + 255.0 * alpha
    out = out * (1.0 - brightness_lift) + 255.0 * brightness_lift
    return RasterImage(np.clip(np.round(out), 0, 255).astype(np.uint8))


def _range_smooth(px: np.ndarray, iters: int) -> np.ndarray:
    """Edge-preserving smoothing: 5x5 window, weights from a Gaussian on the
    squared channel distance to the center pixel. Spatially uniform, so flat
    regions average while strong edges stay put.

    The weight is symmetric in the pixel pair, so each unordered offset pair
    is evaluated once on the padded grid and read back for both directions;
    the center term contributes weight 1 directly. That halves the distance
    and exp work, which dominates the cost of this filter.
    """
    chan = px.astype(np.float32).transpose(2, 0, 1).copy()
    inv = np.float32(-0.5 / (CARTOON_SIGMA * CARTOON_SIGMA))
    pairs = [(dy, dx) for dy in range(-2, 3) for dx in range(-2, 3) if (dy, dx) < (0, 0)]
    h, w = chan.shape[1:]
    ph, pw = h + 4, w + 4
    for _ in range(iters):
        padded = np.pad(chan, ((0, 0), (2, 2), (2, 2)), mode="edge")
        acc = chan.copy()
        wsum = np.ones((h, w), dtype=np.float32)
        tmp = np.empty_like(chan)
        for dy, dx in pairs:
            # D(y, x) = ||P(y+ay, x+ax) - P(y+ay+dy, x+ax+dx)||^2 on the
            # padded grid, with (ay, ax) = (max(0, -dy), max(0, -dx)).
            lead = padded[:, max(0, -dy) : ph - max(0, dy), max(0, -dx) : pw - max(0, dx)]
            lag = padded[:, max(0, dy) : ph - max(0, -dy), max(0, dx) : pw - max(0, -dx)]
            diff = lead - lag
            d2 = diff[0] * diff[0]
            d2 += diff[1] * diff[1]
            d2 += diff[2] * diff[2]
            g = np.exp(d2 * inv, out=d2)
            for sy, sx in ((dy, dx), (-dy, -dx)):
                gview = g[2 + min(0, sy) : 2 + min(0, sy) + h, 2 + min(0, sx) : 2 + min(0, sx) + w]
                win = padded[:, 2 + sy : 2 + sy + h, 2 + sx : 2 + sx + w]
                np.multiply(win, gview, out=tmp)
                acc += tmp
                wsum += gview
        chan = acc / wsum
    return np.ascontiguousarray(chan.transpose(1, 2, 0))


def _sobel_magnitude(gray: np.ndarray) -> np.ndarray:
    """Gradient magnitude normalized by the theoretical maximum 4*255*sqrt(2)."""
    padded = np.pad(gray, 1, mode="edge")

    def shift(dy, dx):
        h, w = gray.shape
        return padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]

    gx = (
        shift(-1, 1) + 2 * shift(0, 1) + shift(1, 1)
        - shift(-1, -1) - 2 * shift(0, -1) - shift(1, -1)
    )
    gy = (
        shift(1, -1) + 2 * shift(1, 0) + shift(1, 1)
        - shift(-1, -1) - 2 * shift(-1, 0) - shift(-1, 1)
    )
    return np.sqrt(gx * gx + gy * gy) / (4.0 * 255.0 * math.sqrt(2.0))


def cartoon_corrupt(
    img: RasterImage,
    levels: int = 6,
    smooth_iters: int = 3,
    edge_threshold: float = 0.25,
) -> RasterImage:
    """Cartoonization; deterministic, no RNG.

    Quantization maps value v to the center of its uniform bin:
    (2 * (v * levels // 256) + 1) * 256 // (2 * levels); levels=256 is the
    identity. smooth_iters=0 skips smoothing, and an edge_threshold above 1
    disables edge painting (the normalized magnitude cannot exceed 1), so
    (256, 0, >1) passes pixels through untouched.
    """
    if not 2 <= levels <= 256:
        raise ValidationError(f"levels must be in 2..256, got {levels}")
    if smooth_iters < 0:
        raise ValidationError(f"smooth_iters must be >= 0, got {smooth_iters}")
    if edge_threshold <= 0.0:
        raise ValidationError(f"edge_threshold must be > 0, got {edge_threshold}")

    smoothed = _range_smooth(img.pixels, smooth_iters)
    ints = np.clip(np.round(smoothed), 0, 255).astype(np.int64)
    bins = ints * levels // 256
    quantized = ((2 * bins + 1) * 256 // (2 * levels)).astype(np.uint8)

    gray = (
        0.299 * smoothed[..., 0] + 0.587 * smoothed[..., 1] + 0.114 * smoothed[..., 2]
    ).astype(np.float64)
    edges = _sobel_magnitude(gray) >= edge_threshold
    quantized[edges] = 0
    return RasterImage(quantized)


def random_noise_image(width: int, height: int, seed: int = 0) -> RasterImage:
    """iid uniform bytes; draw i (row-major, channel-minor) is byte i of the
    stream."""
    if width < 1 or height < 1:
        raise ValidationError(f"image must be at least 1x1, got {width}x{height}")
    return RasterImage(byte_block(seed, width * height * 3).reshape(height, width, 3))


def crop_bbox(img: RasterImage, x0: int, y0: int, x1: int, y1: int) -> RasterImage:
    """Cut [x0, x1) x [y0, y1) out of the image."""
    if not (0 <= x0 < x1 <= img.width and 0 <= y0 < y1 <= img.height):
        raise ValidationError(
            f"bbox ({x0},{y0})..({x1},{y1}) invalid for {img.width}x{img.height} image"
        )
    return RasterImage(img.pixels[y0:y1, x0:x1].copy())


@dataclass(frozen=True)
class CorruptionSpec:
    """A corruption kind, its parameters (defaults filled in), and the seed."""

    kind: str
    seed: int = 0
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(
                f"unknown corruption {self.kind!r}, expected one of {', '.join(KINDS)}"
            )
        defaults = DEFAULT_PARAMS[self.kind]
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise ValidationError(
                f"{self.kind}: unknown parameter(s) {sorted(unknown)};"
                f" valid: {sorted(defaults)}"
            )
        merged = dict(defaults)
        merged.update(self.params)
        object.__setattr__(self, "params", merged)

    def to_json(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "params": dict(self.params)}

    @classmethod
    def from_json(cls, obj: Mapping) -> "CorruptionSpec":
        try:
            return cls(obj["kind"], int(obj.get("seed", 0)), dict(obj.get("params", {})))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed corruption spec: {exc!r}") from exc


def apply_corruption(img: RasterImage, spec: CorruptionSpec) -> RasterImage:
    p = spec.params
    if spec.kind == "salt_pepper":
        return salt_pepper(img, p["p"], spec.seed)
    if spec.kind == "jpeg":
        return jpeg_corrupt(img, int(p["quality"]))
    if spec.kind == "snow":
        return snow_corrupt(
            img, p["density"], int(p["blur_radius"]), p["brightness_lift"], spec.seed
        )
    return cartoon_corrupt(img, int(p["levels"]), int(p["smooth_iters"]), p["edge_threshold"])


def _fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & ((1 << 64) - 1)
    return h


def file_seed(base_seed: int, name: str) -> int:
    """Per-file corruption seed: stable mix of the base seed and the file's
    base name, so each image gets its own noise but reruns are identical."""
    return mix64(base_seed ^ _fnv1a64(name))


def corrupt_directory(
    in_dir: str | Path, out_dir: str | Path, spec: CorruptionSpec
) -> Iterator[dict]:
    """Corrupt every .png/.ppm in ``in_dir`` (sorted by name) into
    ``out_dir`` under the same file name, yielding one manifest entry per
    file. The caller owns writing the manifest."""
    in_dir, out_dir = Path(in_dir), Path(out_dir)
    files = sorted(
        p for p in in_dir.iterdir() if p.suffix.lower() in (".png", ".ppm")
    )
    if not files:
        raise ValidationError(f"no .png or .ppm files in {in_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)
    for src in files:
        seed = file_seed(spec.seed, src.name)
        per_file = CorruptionSpec(spec.kind, seed, dict(spec.params))
        img = load_image(src)
        dst = out_dir / src.name
        save_image(apply_corruption(img, per_file), dst)
        yield {
            "src": str(src),
            "dst": str(dst),
            "kind": spec.kind,
            "seed": seed,
            "params": dict(spec.params),
        }


def write_corruption_manifest(entries, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(json.dumps(entry) + "\n")
