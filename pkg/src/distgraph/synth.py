"""Region-wise pair synthesis: degradation settings, plans, compositing.

A setting is a whole-image degradation regime: one uniform family,
clean, or mixed per-region sampling. Under uniform and mixed settings
each region is independently left clean with probability 0.2 and
degraded with probability 0.8; degraded regions draw a severity
uniformly, and mixed regions additionally draw the family uniformly
from the 14 degrading ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .distortions import DistortionSpec, apply_distortion, clean_spec, make_spec
from .errors import DimensionMismatch
from .graph import DEGRADING_FAMILIES, DEGRADING_SEVERITIES, Family
from .imageio import RasterImage
from .labelmap import LabelMap

CLEAN_PROBABILITY = 0.2


class SettingKind(Enum):
    UNIFORM = "uniform"
    CLEAN = "clean"
    MIXED = "mixed"


@dataclass(frozen=True)
class Setting:
    kind: SettingKind
    family: Optional[Family] = None

    def __post_init__(self):
        if self.kind is SettingKind.UNIFORM:
            if self.family is None or self.family is Family.CLEAN:
                raise ValueError("uniform settings need a degrading family")
        elif self.family is not None:
            raise ValueError(f"{self.kind.value} setting carries no family")

    @staticmethod
    def uniform(family: Family) -> "Setting":
        return Setting(SettingKind.UNIFORM, family)

    @staticmethod
    def clean() -> "Setting":
        return Setting(SettingKind.CLEAN)

    @staticmethod
    def mixed() -> "Setting":
        return Setting(SettingKind.MIXED)

    def as_string(self) -> str:
        if self.kind is SettingKind.UNIFORM:
            return f"uniform:{self.family.value}"
        return self.kind.value

    @staticmethod
    def from_string(text: str) -> "Setting":
        if text == "clean":
            return Setting.clean()
        if text == "mixed":
            return Setting.mixed()
        if text.startswith("uniform:"):
            return Setting.uniform(Family(text.split(":", 1)[1]))
        raise ValueError(f"unknown setting {text!r}")


def all_settings() -> tuple[Setting, ...]:
    """The 16 settings in canonical order: 14 uniform, clean, mixed."""
    uniforms = tuple(Setting.uniform(f) for f in DEGRADING_FAMILIES)
    return uniforms + (Setting.clean(), Setting.mixed())


RegionPlan = tuple[DistortionSpec, ...]


def sample_region_plan(
    rng: np.random.Generator,
    n_regions: int,
    setting: Setting,
    seeds: Optional[Sequence[int]] = None,
) -> RegionPlan:
    """Draw one side's per-region specs under a setting.

    ``seeds`` supplies the per-region operator seeds (one per region);
    without it they are drawn from ``rng``, which keeps the plan a pure
    function of the generator state either way.
    """
    if n_regions < 1:
        raise ValueError("n_regions must be >= 1")
    if seeds is not None and len(seeds) != n_regions:
        raise ValueError("seeds must have one entry per region")
    plan = []
    for i in range(n_regions):
        seed = (
            int(seeds[i])
            if seeds is not None
            else int(rng.integers(0, 2**64, dtype=np.uint64))
        )
        if setting.kind is SettingKind.CLEAN:
            plan.append(clean_spec())
            continue
        if rng.random() < CLEAN_PROBABILITY:
            plan.append(clean_spec())
            continue
        if setting.kind is SettingKind.UNIFORM:
            family = setting.family
        else:
            family = DEGRADING_FAMILIES[int(rng.integers(len(DEGRADING_FAMILIES)))]
        severity = DEGRADING_SEVERITIES[int(rng.integers(len(DEGRADING_SEVERITIES)))]
        plan.append(make_spec(family, severity, seed))
    return tuple(plan)


def composite_region(
    base: RasterImage,
    degraded: RasterImage,
    label_map: LabelMap,
    region_index: int,
) -> RasterImage:
    """Take the region's pixels from ``degraded``, all others from ``base``."""
    if (
        base.pixels.shape != degraded.pixels.shape
        or base.height != label_map.height
        or base.width != label_map.width
    ):
        raise DimensionMismatch(
            "base, degraded, and label map must share dimensions"
        )
    mask = label_map.mask(region_index)
    out = np.where(mask[:, :, None], degraded.pixels, base.pixels)
    return RasterImage(out)


def _synthesize_side(
    scene_image: RasterImage, label_map: LabelMap, plan: RegionPlan
) -> RasterImage:
    out = scene_image
    for i, spec in enumerate(plan, start=1):
        if spec.is_clean:
            continue
        degraded = apply_distortion(scene_image, spec)
        out = composite_region(out, degraded, label_map, i)
    return out


def synthesize_pair(
    scene_image: RasterImage,
    label_map: LabelMap,
    plan_anchor: RegionPlan,
    plan_target: RegionPlan,
) -> tuple[RasterImage, RasterImage]:
    """Realize both sides of a pair from one scene.

    Each region's operator sees the whole clean scene and only the
    region's pixels are composited in, so disjoint regions never
    interact and processing order is irrelevant.
    """
    n = label_map.n_regions
    if len(plan_anchor) != n or len(plan_target) != n:
        raise ValueError(
            f"plans must cover all {n} regions "
            f"(got {len(plan_anchor)} and {len(plan_target)})"
        )
    if (
        scene_image.height != label_map.height
        or scene_image.width != label_map.width
    ):
        raise DimensionMismatch("scene image and label map must share dimensions")
    return (
        _synthesize_side(scene_image, label_map, plan_anchor),
        _synthesize_side(scene_image, label_map, plan_target),
    )
