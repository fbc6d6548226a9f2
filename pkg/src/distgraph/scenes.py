"""Seeded procedural scenes so the pipeline runs with zero external data.

A scene is a textured geometric image plus an aligned region label map.
Regions are a nearest-seed-point partition; each gets a mid-saturation
base color modulated by two octaves of value noise, which gives every
region enough luma structure and chroma for all distortion families to
register on the scorer.
"""

from __future__ import annotations

import colorsys
from dataclasses import dataclass

import numpy as np

from .imageio import RasterImage
from .labelmap import LabelMap
from .seeds import mix64

_CLASS_VOCAB = (
    "sky", "grass", "wall", "road", "tree", "car", "water", "rock",
    "sand", "cloud", "roof", "door", "window", "field", "hill", "path",
)

MIN_REGIONS = 4
MAX_REGIONS = 16


@dataclass(frozen=True)
class Scene:
    scene_id: str
    image: RasterImage
    label_map: LabelMap
    class_names: tuple[str, ...]  # class_names[i - 1] names region i

    @property
    def n_regions(self) -> int:
        return len(self.class_names)


def _bilinear_upsample(grid: np.ndarray, height: int, width: int) -> np.ndarray:
    gy = np.linspace(0.0, grid.shape[0] - 1.0, height)
    gx = np.linspace(0.0, grid.shape[1] - 1.0, width)
    y0 = np.floor(gy).astype(int)
    x0 = np.floor(gx).astype(int)
    y1 = np.minimum(y0 + 1, grid.shape[0] - 1)
    x1 = np.minimum(x0 + 1, grid.shape[1] - 1)
    fy = (gy - y0)[:, None]
    fx = (gx - x0)[None, :]
    top = grid[y0][:, x0] * (1 - fx) + grid[y0][:, x1] * fx
    bot = grid[y1][:, x0] * (1 - fx) + grid[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


def _value_noise(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    coarse = rng.uniform(-1.0, 1.0, (height // 8 + 2, width // 8 + 2))
    fine = rng.uniform(-1.0, 1.0, (height // 3 + 2, width // 3 + 2))
    return 0.7 * _bilinear_upsample(coarse, height, width) + 0.3 * _bilinear_upsample(
        fine, height, width
    )


def generate_scene(
    seed: int,
    *,
    size: int = 64,
    n_regions: int | None = None,
    scene_id: str | None = None,
) -> Scene:
    """Build one deterministic scene; region count defaults to 4..16."""
    rng = np.random.default_rng(seed)
    k = (
        int(n_regions)
        if n_regions is not None
        else int(rng.integers(MIN_REGIONS, MAX_REGIONS + 1))
    )
    if k < 1:
        raise ValueError("scenes need at least one region")

    flat = rng.choice(size * size, size=k, replace=False)
    py, px = flat // size, flat % size
    yy, xx = np.mgrid[0:size, 0:size]
    d2 = (yy[None] - py[:, None, None]) ** 2 + (xx[None] - px[:, None, None]) ** 2
    labels = (np.argmin(d2, axis=0) + 1).astype(np.uint16)

    colors = np.empty((k, 3))
    for i in range(k):
        hue = rng.uniform(0.0, 1.0)
        sat = rng.uniform(0.35, 0.65)
        val = rng.uniform(0.45, 0.85)
        colors[i] = colorsys.hsv_to_rgb(hue, sat, val)
    noise = _value_noise(rng, size, size)
    base = colors[labels - 1] * 255.0
    pixels = base * (1.0 + 0.28 * noise[:, :, None])
    image = RasterImage(np.clip(np.rint(pixels), 0, 255).astype(np.uint8))

    names = tuple(_CLASS_VOCAB[i % len(_CLASS_VOCAB)] for i in range(k))
    return Scene(
        scene_id=scene_id or f"scene{seed & 0xFFFF:05d}",
        image=image,
        label_map=LabelMap(labels),
        class_names=names,
    )


def generate_scenes(
    global_seed: int,
    count: int,
    *,
    size: int = 64,
    n_regions: int | None = None,
) -> list[Scene]:
    return [
        generate_scene(
            mix64(global_seed, 0x5CE4E, i),
            size=size,
            n_regions=n_regions,
            scene_id=f"scene{i:04d}",
        )
        for i in range(count)
    ]
