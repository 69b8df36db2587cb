"""Raster images: an explicit RGB uint8 array type plus PNG and binary PPM
(P6) file support. PNG goes through Pillow; PPM is read and written here so
one interchange path stays fully transparent down to the bytes."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError, ValidationError


@dataclass(frozen=True, eq=False)
class RasterImage:
    """Height x width x 3 uint8 RGB pixels."""

    pixels: np.ndarray

    def __post_init__(self):
        px = self.pixels
        if not isinstance(px, np.ndarray) or px.ndim != 3 or px.shape[2] != 3:
            raise ValidationError(
                f"pixels must be an (h, w, 3) array, got {getattr(px, 'shape', type(px))}"
            )
        if px.dtype != np.uint8:
            raise ValidationError(f"pixels must be uint8, got {px.dtype}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValidationError(f"image must be at least 1x1, got {px.shape[:2]}")

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    def __eq__(self, other) -> bool:
        if not isinstance(other, RasterImage):
            return NotImplemented
        return bool(np.array_equal(self.pixels, other.pixels))

    @classmethod
    def filled(cls, width: int, height: int, rgb=(0, 0, 0)) -> "RasterImage":
        px = np.empty((height, width, 3), dtype=np.uint8)
        px[:, :] = np.asarray(rgb, dtype=np.uint8)
        return cls(px)


def save_ppm(img: RasterImage, path: str | Path) -> None:
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.pixels.tobytes())


def load_ppm(path: str | Path) -> RasterImage:
    data = Path(path).read_bytes()

    # The header is three whitespace-separated fields after the magic,
    # with '#' comments allowed; one whitespace byte ends the header.
    def fail(msg):
        return FormatError(msg, path=str(path))

    if not data.startswith(b"P6"):
        raise fail("not a binary PPM (missing P6 magic)")
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise fail("truncated header")
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError:
        raise fail(f"non-numeric header fields {fields!r}") from None
    if maxval != 255:
        raise fail(f"only maxval 255 is supported, got {maxval}")
    if width < 1 or height < 1:
        raise fail(f"bad dimensions {width}x{height}")
    expected = width * height * 3
    raster = data[pos : pos + expected]
    if len(raster) != expected:
        raise fail(f"expected {expected} raster bytes, found {len(raster)}")
    px = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3).copy()
    return RasterImage(px)


def load_image(path: str | Path) -> RasterImage:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".ppm":
        return load_ppm(path)
    if suffix == ".png":
        try:
            with Image.open(path) as im:
                return RasterImage(np.asarray(im.convert("RGB"), dtype=np.uint8))
        except (OSError, SyntaxError) as exc:
            raise FormatError(f"unreadable PNG: {exc}", path=str(path)) from exc
    raise ValidationError(f"unsupported image format {suffix!r} (use .png or .ppm)")


def save_image(img: RasterImage, path: str | Path) -> None:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".ppm":
        save_ppm(img, path)
    elif suffix == ".png":
        Image.fromarray(img.pixels, mode="RGB").save(path, format="PNG")
    else:
        raise ValidationError(f"unsupported image format {suffix!r} (use .png or .ppm)")
