"""8-bit RGB rasters and their on-disk formats.

PPM ("P6") is read and written by this module byte for byte, which is
what the determinism guarantees rest on. PNG is supported through
Pillow for interoperability.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ParseError

MIN_SIDE = 64


@dataclass(frozen=True)
class RasterImage:
    pixels: np.ndarray  # uint8, shape (height, width, 3)

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.dtype != np.uint8:
            raise ValueError("raster pixels must be uint8")
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError("raster must have shape (height, width, 3)")
        if arr.shape[0] < MIN_SIDE or arr.shape[1] < MIN_SIDE:
            raise ValueError(f"raster sides must be >= {MIN_SIDE} pixels")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, RasterImage) and np.array_equal(
            self.pixels, other.pixels
        )

    def __hash__(self):
        return hash((self.width, self.height, self.pixels.tobytes()))


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            while pos < n and data[pos : pos + 1] != b"\n":
                pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ParseError("truncated header", offset=start)
    return data[start:pos], pos


def load_ppm(data: bytes) -> RasterImage:
    if data[:2] != b"P6":
        raise ParseError("not a binary PPM (missing P6 magic)", offset=0)
    pos = 2
    width_tok, pos = _read_token(data, pos)
    height_tok, pos = _read_token(data, pos)
    maxval_tok, pos = _read_token(data, pos)
    try:
        width, height, maxval = int(width_tok), int(height_tok), int(maxval_tok)
    except ValueError:
        raise ParseError("non-numeric header field", offset=pos) from None
    if maxval != 255:
        raise ParseError(f"images require maxval 255, got {maxval}", offset=pos)
    pos += 1
    expected = width * height * 3
    raster = data[pos : pos + expected]
    if len(raster) != expected:
        raise ParseError(
            f"raster truncated: expected {expected} bytes, got {len(raster)}",
            offset=pos + len(raster),
        )
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3)
    return RasterImage(pixels.copy())


def store_ppm(image: RasterImage) -> bytes:
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + image.pixels.tobytes()


def load_png(data: bytes) -> RasterImage:
    try:
        with Image.open(io.BytesIO(data)) as im:
            rgb = im.convert("RGB")
            return RasterImage(np.asarray(rgb, dtype=np.uint8))
    except Exception as exc:
        raise ParseError(f"bad PNG: {exc}") from None


def store_png(image: RasterImage) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(image.pixels, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def load_image(path: str | Path) -> RasterImage:
    path = Path(path)
    data = path.read_bytes()
    if path.suffix.lower() == ".png":
        return load_png(data)
    return load_ppm(data)


def save_image(image: RasterImage, path: str | Path) -> None:
    path = Path(path)
    if path.suffix.lower() == ".png":
        path.write_bytes(store_png(image))
    else:
        path.write_bytes(store_ppm(image))
