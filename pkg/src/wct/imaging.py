"""Grayscale image container, PGM I/O, gray-level quantization and block tiling."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


class ImagingError(ValueError):
    pass


class PgmError(ImagingError):
    """Malformed PGM input. ``offset`` is the byte position where parsing failed."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class PgmHeaderError(PgmError):
    pass


class PgmTruncatedError(PgmError):
    pass


class PgmMaxvalError(PgmError):
    pass


@dataclass(frozen=True)
class GrayImage:
    """8-bit grayscale raster, stored as an ``(height, width)`` uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ImagingError(f"image must be a non-empty 2-D raster, got shape {px.shape}")
        if px.dtype != np.uint8:
            if not np.all(np.isfinite(px)) or px.min() < 0 or px.max() > 255:
                raise ImagingError("pixel intensities must lie in [0, 255]")
            if not np.all(px == np.round(px)):
                raise ImagingError("pixel intensities must be integers")
            px = px.astype(np.uint8)
        px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(np.array_equal(self.pixels, other.pixels))

    __hash__ = None


@dataclass(frozen=True)
class QuantizedImage:
    values: np.ndarray
    levels: int

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2 or v.size == 0:
            raise ImagingError(f"quantized image must be a non-empty 2-D array, got shape {v.shape}")
        if self.levels < 2:
            raise ImagingError(f"levels must be >= 2, got {self.levels}")
        if v.min() < 0 or v.max() >= self.levels:
            raise ImagingError(f"quantized values must lie in [0, {self.levels - 1}]")
        v = v.astype(np.intp, copy=True)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class BlockSpec:
    block_size: int = 32
    stride: int = 32

    def __post_init__(self):
        if self.block_size < 1:
            raise ImagingError(f"block_size must be >= 1, got {self.block_size}")
        if self.stride < 1:
            raise ImagingError(f"stride must be >= 1, got {self.stride}")

    def grid_shape(self, height: int, width: int) -> tuple[int, int]:
        """Number of block positions along (rows, cols) for an image of the given size."""
        b, s = self.block_size, self.stride
        if b > height or b > width:
            raise ImagingError(f"block of size {b} does not fit in a {width}x{height} image")
        return (height - b) // s + 1, (width - b) // s + 1


# --- PGM ------------------------------------------------------------------

_WHITESPACE = b" \t\r\n\v\f"


def _next_token(data: bytes, pos: int) -> tuple[bytes, int, int]:
    """Return (token, token_start, position after token), skipping whitespace and comments."""
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c in _WHITESPACE:
            pos += 1
        elif c == b"#":
            while pos < n and data[pos : pos + 1] not in b"\r\n":
                pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos : pos + 1] not in _WHITESPACE and data[pos : pos + 1] != b"#":
        pos += 1
    return data[start:pos], start, pos


def _header_int(data: bytes, pos: int, what: str) -> tuple[int, int, int]:
    tok, start, pos = _next_token(data, pos)
    if not tok:
        raise PgmTruncatedError(f"missing {what} in header", start)
    if not tok.isdigit():
        raise PgmHeaderError(f"invalid {what} {tok!r}", start)
    return int(tok), start, pos


def load_pgm(data: bytes) -> GrayImage:
    """Parse an ASCII (P2) or binary (P5) PGM with maxval <= 255."""
    if len(data) < 2:
        raise PgmTruncatedError("empty or truncated file", 0)
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise PgmHeaderError(f"unsupported magic number {magic!r}", 0)
    pos = 2
    width, start, pos = _header_int(data, pos, "width")
    if width < 1:
        raise PgmHeaderError("width must be positive", start)
    height, start, pos = _header_int(data, pos, "height")
    if height < 1:
        raise PgmHeaderError("height must be positive", start)
    maxval, start, pos = _header_int(data, pos, "maxval")
    if maxval < 1 or maxval > 255:
        raise PgmMaxvalError(f"maxval {maxval} outside 1..255", start)
    count = width * height

    if magic == b"P5":
        if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE:
            raise PgmHeaderError("expected single whitespace after maxval", pos)
        pos += 1
        payload = data[pos : pos + count]
        if len(payload) < count:
            raise PgmTruncatedError(f"expected {count} pixel bytes, found {len(payload)}", pos + len(payload))
        values = np.frombuffer(payload, dtype=np.uint8)
        bad = np.flatnonzero(values > maxval)
        if bad.size:
            raise PgmHeaderError(f"pixel value {values[bad[0]]} exceeds maxval {maxval}", pos + int(bad[0]))
    else:
        values = np.empty(count, dtype=np.uint8)
        for k in range(count):
            tok, start, pos = _next_token(data, pos)
            if not tok:
                raise PgmTruncatedError(f"expected {count} pixel values, found {k}", start)
            if not tok.isdigit() or int(tok) > maxval:
                raise PgmHeaderError(f"invalid pixel value {tok!r}", start)
            values[k] = int(tok)

    return GrayImage(values.reshape(height, width))


def write_pgm(img: GrayImage) -> bytes:
    """Binary (P5) encoding with maxval 255."""
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(img.pixels, dtype=np.uint8).tobytes()


def write_pgm_ascii(img: GrayImage) -> bytes:
    lines = [f"P2\n{img.width} {img.height}\n255"]
    lines += [" ".join(str(int(v)) for v in row) for row in img.pixels]
    return ("\n".join(lines) + "\n").encode("ascii")


def read_pgm_file(path: str | Path) -> GrayImage:
    return load_pgm(Path(path).read_bytes())


def write_pgm_file(path: str | Path, img: GrayImage) -> None:
    Path(path).write_bytes(write_pgm(img))


# --- quantization and tiling -----------------------------------------------


def quantize(img: GrayImage, levels: int) -> QuantizedImage:
    """Uniform binning ``floor(p * levels / 256)``."""
    if not 2 <= levels <= 256:
        raise ImagingError(f"levels must be in [2, 256], got {levels}")
    q = (img.pixels.astype(np.intp) * levels) // 256
    return QuantizedImage(q, levels)


def extract_blocks(img: GrayImage, spec: BlockSpec) -> list[GrayImage]:
    """Square blocks enumerated row-major from the top-left corner.

    Only positions where the block fits entirely inside the image are used, so
    trailing rows/columns that do not fill a block are dropped.
    """
    rows, cols = spec.grid_shape(img.height, img.width)
    b, s = spec.block_size, spec.stride
    return [
        GrayImage(img.pixels[r * s : r * s + b, c * s : c * s + b])
        for r in range(rows)
        for c in range(cols)
    ]


def centered_crop(img: GrayImage, spec: BlockSpec) -> GrayImage:
    """Crop to the largest block tiling, centered in the image."""
    rows, cols = spec.grid_shape(img.height, img.width)
    extent_h = (rows - 1) * spec.stride + spec.block_size
    extent_w = (cols - 1) * spec.stride + spec.block_size
    top = (img.height - extent_h) // 2
    left = (img.width - extent_w) // 2
    return GrayImage(img.pixels[top : top + extent_h, left : left + extent_w])
