"""Region quality scoring and the score-difference relation labeler.

The default scorer is a full-reference masked structural-similarity
metric on the luma channel. It is an analytic stand-in behind the same
contract a learned metric would fill; externally computed scores can be
injected through a ``ScoreTable`` instead.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from scipy import ndimage

from .errors import (
    DimensionMismatch,
    DuplicateKey,
    MissingPrediction,
    OutOfRange,
    ParseError,
    ScoreOutOfRange,
)
from .graph import RelationLabel, quantize_score
from .imageio import RasterImage
from .labelmap import LabelMap

WINDOW = 11
WINDOW_SIGMA = 1.5
_C1 = (0.01 * 255.0) ** 2
_C2 = (0.03 * 255.0) ** 2

SAME_THRESHOLD = 0.1
SIGNIFICANT_THRESHOLD = 0.3


def _luma(pixels: np.ndarray) -> np.ndarray:
    x = pixels.astype(np.float64)
    return 0.299 * x[:, :, 0] + 0.587 * x[:, :, 1] + 0.114 * x[:, :, 2]


def _gaussian_kernel() -> np.ndarray:
    half = WINDOW // 2
    t = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(t**2) / (2.0 * WINDOW_SIGMA**2))
    return k / k.sum()

_KERNEL = _gaussian_kernel()


def _windowed(x: np.ndarray) -> np.ndarray:
    # Separable Gaussian window; samples beyond the crop are reflected.
    out = ndimage.correlate1d(x, _KERNEL, axis=0, mode="reflect")
    return ndimage.correlate1d(out, _KERNEL, axis=1, mode="reflect")


def default_score_region(
    ref: RasterImage,
    deg: RasterImage,
    label_map: LabelMap,
    region_index: int,
) -> float:
    """Masked structural similarity of one region, mapped to [0, 1].

    Windows are centered on every pixel of the region's bounding box
    (expanded by the window radius and clipped to the image); only
    windows whose center lies in the region are averaged. Regions whose
    bounding box cannot hold one full window fall back to masked
    mean-squared error mapped through 1 / (1 + MSE / 100).
    """
    if ref.pixels.shape != deg.pixels.shape or (
        ref.height,
        ref.width,
    ) != (label_map.height, label_map.width):
        raise DimensionMismatch("reference, degraded, and label map must align")
    mask = label_map.require_region(region_index)

    ys, xs = np.nonzero(mask)
    y0, y1 = int(ys.min()), int(ys.max()) + 1
    x0, x1 = int(xs.min()), int(xs.max()) + 1

    ref_luma = _luma(ref.pixels)
    deg_luma = _luma(deg.pixels)

    if (y1 - y0) < WINDOW or (x1 - x0) < WINDOW:
        diff = ref_luma[mask] - deg_luma[mask]
        mse = float(np.mean(diff * diff))
        return float(np.clip(1.0 / (1.0 + mse / 100.0), 0.0, 1.0))

    half = WINDOW // 2
    cy0, cy1 = max(0, y0 - half), min(ref.height, y1 + half)
    cx0, cx1 = max(0, x0 - half), min(ref.width, x1 + half)
    x = ref_luma[cy0:cy1, cx0:cx1]
    y = deg_luma[cy0:cy1, cx0:cx1]
    m = mask[cy0:cy1, cx0:cx1]

    mu_x = _windowed(x)
    mu_y = _windowed(y)
    var_x = _windowed(x * x) - mu_x * mu_x
    var_y = _windowed(y * y) - mu_y * mu_y
    cov = _windowed(x * y) - mu_x * mu_y

    ssim = ((2.0 * mu_x * mu_y + _C1) * (2.0 * cov + _C2)) / (
        (mu_x * mu_x + mu_y * mu_y + _C1) * (var_x + var_y + _C2)
    )
    value = float(np.mean(ssim[m]))
    return float(np.clip((value + 1.0) / 2.0, 0.0, 1.0))


def label_relation(score_anchor: float, score_target: float) -> RelationLabel:
    """Comparative relation from the anchor-minus-target score difference.

    Differences of exactly 0.1 fall in the slight band and differences
    of exactly 0.3 in the significant band. Scores carry six decimal
    digits everywhere in this toolkit, so the difference is taken in
    integer micro-units; the band edges are then exact.
    """
    for s in (score_anchor, score_target):
        if not 0.0 <= s <= 1.0:
            raise OutOfRange(f"score {s} not in [0,1]")
    delta = round(score_anchor * 1e6) - round(score_target * 1e6)
    same_band = round(SAME_THRESHOLD * 1e6)
    significant_band = round(SIGNIFICANT_THRESHOLD * 1e6)
    if abs(delta) < same_band:
        return RelationLabel.SAME
    if delta >= significant_band:
        return RelationLabel.SIGNIFICANTLY_BETTER
    if delta <= -significant_band:
        return RelationLabel.SIGNIFICANTLY_WORSE
    return (
        RelationLabel.SLIGHTLY_BETTER if delta > 0 else RelationLabel.SLIGHTLY_WORSE
    )


# --- external score injection ------------------------------------------------

SCORE_TABLE_HEADER = ("pair_id", "side", "region_index", "score")


@dataclass(frozen=True)
class ScoreTable:
    scores: Mapping[tuple[str, str, int], float]

    def __len__(self) -> int:
        return len(self.scores)

    def lookup(self, pair_id: str, side: str, region_index: int) -> float:
        try:
            return self.scores[(pair_id, side, region_index)]
        except KeyError:
            raise MissingPrediction(
                f"no score for ({pair_id}, {side}, {region_index})"
            ) from None


def load_score_table(data: bytes) -> ScoreTable:
    text = data.decode("utf-8")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty score table") from None
    if tuple(header) != SCORE_TABLE_HEADER:
        raise ParseError(f"bad header {header!r}")
    scores: dict[tuple[str, str, int], float] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise ParseError(f"line {lineno}: expected 4 fields, got {len(row)}")
        pair_id, side, index_text, score_text = row
        if side not in ("A", "T"):
            raise ParseError(f"line {lineno}: side must be A or T, got {side!r}")
        try:
            index = int(index_text)
            score = float(score_text)
        except ValueError:
            raise ParseError(f"line {lineno}: non-numeric field") from None
        if not 0.0 <= score <= 1.0:
            raise ScoreOutOfRange(f"line {lineno}: score {score} not in [0,1]")
        key = (pair_id, side, index)
        if key in scores:
            raise DuplicateKey(f"line {lineno}: duplicate key {key}")
        scores[key] = score
    return ScoreTable(scores)


def store_score_table(table: ScoreTable) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCORE_TABLE_HEADER)
    for (pair_id, side, index), score in sorted(table.scores.items()):
        writer.writerow([pair_id, side, index, format(score, ".6f")])
    return buf.getvalue().encode("utf-8")


# --- scorer plumbing ---------------------------------------------------------

RegionScorer = Callable[[RasterImage, RasterImage, LabelMap, int], float]


class DefaultScorer:
    """Scores regions with the built-in masked structural similarity."""

    def score_region(
        self,
        pair_id: str,
        side: str,
        ref: RasterImage,
        deg: RasterImage,
        label_map: LabelMap,
        region_index: int,
    ) -> float:
        return quantize_score(default_score_region(ref, deg, label_map, region_index))


class TableScorer:
    """Serves region scores from an externally computed table."""

    def __init__(self, table: ScoreTable):
        self._table = table

    def score_region(
        self,
        pair_id: str,
        side: str,
        ref: RasterImage,
        deg: RasterImage,
        label_map: LabelMap,
        region_index: int,
    ) -> float:
        return quantize_score(self._table.lookup(pair_id, side, region_index))
