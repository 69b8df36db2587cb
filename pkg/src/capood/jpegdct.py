"""JPEG-style degradation as an explicit block-DCT pipeline.

This is deliberately not a JPEG codec: no entropy coding, no subsampling,
no file format. It reproduces the part that destroys information, so the
artifact is transparent and exactly reproducible:

RGB -> full-range BT.601 YCbCr (float) -> per channel: level shift by -128,
8x8 block DCT, divide by the quality-scaled quantization table and round
(ties to even), multiply back, inverse DCT -> RGB, rounded and clipped once
at the end. Images are edge-padded to block multiples and cropped back.

Quality scaling is the classic convention: scale = 5000 // q for q < 50
else 200 - 2q; each table entry becomes clamp((base * scale + 50) // 100,
1, 255). Quality 50 reproduces the base tables; quality 100 makes every
divisor 1, so the only loss is rounding.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .images import RasterImage

# Base luminance / chrominance quantization tables (quality 50).
LUMA_TABLE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.int64,
)

CHROMA_TABLE = np.array(
    [
        [17, 18, 24, 47, 99, 99, 99, 99],
        [18, 21, 26, 66, 99, 99, 99, 99],
        [24, 26, 56, 99, 99, 99, 99, 99],
        [47, 66, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
    ],
    dtype=np.int64,
)

BLOCK = 8


def scaled_table(base: np.ndarray, quality: int) -> np.ndarray:
    """Quality-scaled quantization table, entries clamped to [1, 255]."""
    if not 1 <= quality <= 100:
        raise ValidationError(f"quality must be in 1..100, got {quality}")
    scale = 5000 // quality if quality < 50 else 200 - 2 * quality
    return np.clip((base * scale + 50) // 100, 1, 255)


def _dct_matrix() -> np.ndarray:
    # Orthonormal DCT-II: T[i, j] = c(i) cos((2j + 1) i pi / 16).
    i = np.arange(BLOCK).reshape(-1, 1)
    j = np.arange(BLOCK).reshape(1, -1)
    t = np.cos((2 * j + 1) * i * np.pi / (2 * BLOCK))
    t *= np.sqrt(2.0 / BLOCK)
    t[0, :] = np.sqrt(1.0 / BLOCK)
    return t


_DCT = _dct_matrix()


def _to_blocks(channel: np.ndarray) -> np.ndarray:
    h, w = channel.shape
    return channel.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK).transpose(0, 2, 1, 3)


def _from_blocks(blocks: np.ndarray, h: int, w: int) -> np.ndarray:
    return blocks.transpose(0, 2, 1, 3).reshape(h, w)


def _quantize_channel(channel: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Level shift, block DCT, quantize/dequantize, inverse DCT."""
    h, w = channel.shape
    blocks = _to_blocks(channel - 128.0)
    coef = np.einsum("ab,xybc,dc->xyad", _DCT, blocks, _DCT, optimize=True)
    coef = np.round(coef / table) * table
    rec = np.einsum("ba,xybc,cd->xyad", _DCT, coef, _DCT, optimize=True)
    return _from_blocks(rec, h, w) + 128.0


def _rgb_to_ycbcr(px: np.ndarray) -> np.ndarray:
    r, g, b = px[..., 0], px[..., 1], px[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0
    cr = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0
    return np.stack([y, cb, cr], axis=-1)


def _ycbcr_to_rgb(px: np.ndarray) -> np.ndarray:
    y, cb, cr = px[..., 0], px[..., 1] - 128.0, px[..., 2] - 128.0
    r = y + 1.402 * cr
    g = y - 0.344136 * cb - 0.714136 * cr
    b = y + 1.772 * cb
    return np.stack([r, g, b], axis=-1)


def jpeg_corrupt(img: RasterImage, quality: int = 10) -> RasterImage:
    """Run the full degradation pipeline at the given quality."""
    luma_q = scaled_table(LUMA_TABLE, quality).astype(np.float64)
    chroma_q = scaled_table(CHROMA_TABLE, quality).astype(np.float64)

    h, w = img.height, img.width
    pad_h = (-h) % BLOCK
    pad_w = (-w) % BLOCK
    px = np.pad(img.pixels, ((0, pad_h), (0, pad_w), (0, 0)), mode="edge")
    ycc = _rgb_to_ycbcr(px.astype(np.float64))

    out = np.empty_like(ycc)
    out[..., 0] = _quantize_channel(ycc[..., 0], luma_q)
    out[..., 1] = _quantize_channel(ycc[..., 1], chroma_q)
    out[..., 2] = _quantize_channel(ycc[..., 2], chroma_q)

    rgb = _ycbcr_to_rgb(out)[:h, :w]
    return RasterImage(np.clip(np.round(rgb), 0, 255).astype(np.uint8))
