"""Region label maps: the per-pixel region-index raster shared by a pair.

Storage format is binary 16-bit grayscale PGM ("P5", maxval 65535,
big-endian samples). Value 0 marks unassigned pixels; value k selects
region k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyRegion, ParseError


@dataclass(frozen=True)
class IndexGap:
    """Warning record: region indices are not contiguous from 1."""

    missing: tuple[int, ...]

    def __str__(self) -> str:
        return f"index gap: missing {', '.join(map(str, self.missing))}"


@dataclass(frozen=True)
class LabelMap:
    values: np.ndarray  # uint16, shape (height, width)

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.uint16)
        object.__setattr__(self, "values", arr)
        if arr.ndim != 2:
            raise ValueError("label map must be a 2-D grid")

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def n_regions(self) -> int:
        return int(self.values.max(initial=0))

    def mask(self, region_index: int) -> np.ndarray:
        return self.values == np.uint16(region_index)

    def region_pixel_count(self, region_index: int) -> int:
        return int(np.count_nonzero(self.mask(region_index)))

    def require_region(self, region_index: int) -> np.ndarray:
        m = self.mask(region_index)
        if not m.any():
            raise EmptyRegion(f"region {region_index} has no pixels")
        return m

    def index_gaps(self) -> list[IndexGap]:
        present = set(np.unique(self.values).tolist()) - {0}
        if not present:
            return []
        missing = sorted(set(range(1, max(present) + 1)) - present)
        return [IndexGap(tuple(missing))] if missing else []

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelMap) and np.array_equal(
            self.values, other.values
        )

    def __hash__(self):  # frozen dataclass with array payload
        return hash((self.width, self.height, self.values.tobytes()))


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    # Skips whitespace and '#' comment lines between header tokens.
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


def load_label_map(data: bytes) -> tuple[LabelMap, list[IndexGap]]:
    """Parse a 16-bit P5 map; index gaps come back as warnings, not errors."""
    if data[:2] != b"P5":
        raise ParseError("not a binary PGM (missing P5 magic)", offset=0)
    pos = 2
    width_tok, pos = _read_token(data, pos)
    height_tok, pos = _read_token(data, pos)
    maxval_tok, pos = _read_token(data, pos)
    try:
        width, height, maxval = int(width_tok), int(height_tok), int(maxval_tok)
    except ValueError:
        raise ParseError("non-numeric header field", offset=pos) from None
    if maxval != 65535:
        raise ParseError(f"label maps require maxval 65535, got {maxval}", offset=pos)
    pos += 1  # single whitespace byte after maxval
    expected = width * height * 2
    raster = data[pos : pos + expected]
    if len(raster) != expected:
        raise ParseError(
            f"raster truncated: expected {expected} bytes, got {len(raster)}",
            offset=pos + len(raster),
        )
    values = np.frombuffer(raster, dtype=">u2").reshape(height, width)
    label_map = LabelMap(values.astype(np.uint16))
    return label_map, label_map.index_gaps()


def store_label_map(label_map: LabelMap) -> bytes:
    header = f"P5\n{label_map.width} {label_map.height}\n65535\n".encode("ascii")
    return header + label_map.values.astype(">u2").tobytes()
