"""Distortion operators and their severity parameterization.

Every operator is a pure function of (image, resolved parameters, seed):
it degrades the whole image, clamps to [0, 255], and rounds half to even.
Region-wise degradation composes these with mask compositing, see
``synth``.

``severity_params`` is the single authority for the numeric triples
behind minor/moderate/severe. The values are repository constants chosen
so that the default region scorer decreases strictly with severity for
every family; any other monotone choice would do.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy import ndimage

from .errors import InvalidCombination
from .graph import (
    CLEAN_LABEL,
    CLEAN_SUBTYPE,
    DistortionLabel,
    Family,
    SeverityLabel,
    default_subtype,
    register_subtype,
)
from .imageio import RasterImage

_SEVERITIES = (SeverityLabel.MINOR, SeverityLabel.MODERATE, SeverityLabel.SEVERE)

# family -> parameter name -> (minor, moderate, severe)
_PARAM_TRIPLES: dict[Family, dict[str, tuple[float, float, float]]] = {
    Family.BLUR: {"sigma": (1.2, 2.6, 5.0), "strength": (1.2, 2.6, 5.0)},
    Family.BRIGHTNESS: {"gain": (1.18, 1.45, 1.85), "strength": (0.18, 0.45, 0.85)},
    Family.DARKEN: {"gain": (0.78, 0.55, 0.33), "strength": (0.22, 0.45, 0.67)},
    Family.CONTRAST_STRENGTHEN: {
        "scale": (1.35, 1.9, 2.8),
        "strength": (0.35, 0.9, 1.8),
    },
    Family.CONTRAST_WEAKEN: {
        "scale": (0.7, 0.45, 0.22),
        "strength": (0.3, 0.55, 0.78),
    },
    Family.SATURATION_STRENGTHEN: {
        "scale": (1.7, 2.8, 4.5),
        "strength": (0.7, 1.8, 3.5),
    },
    Family.SATURATION_WEAKEN: {
        "scale": (0.55, 0.3, 0.1),
        "strength": (0.45, 0.7, 0.9),
    },
    Family.NOISE: {"sigma": (8.0, 20.0, 40.0), "strength": (8.0, 20.0, 40.0)},
    Family.COMPRESSION: {
        "quality": (70.0, 40.0, 15.0),
        "strength": (30.0, 60.0, 85.0),
    },
    Family.PIXELATE: {"block": (2.0, 4.0, 8.0), "strength": (2.0, 4.0, 8.0)},
    Family.OVERSHARPEN: {
        "amount": (0.8, 2.0, 4.0),
        "radius": (1.5, 1.5, 1.5),
        "strength": (0.8, 2.0, 4.0),
    },
    Family.HAZE: {
        "transmission": (0.75, 0.55, 0.35),
        "airlight": (205.0, 220.0, 235.0),
        "strength": (0.25, 0.45, 0.65),
    },
    Family.RAIN: {
        "density": (0.8, 2.0, 4.5),
        "opacity": (0.35, 0.55, 0.75),
        "length": (9.0, 13.0, 17.0),
        "strength": (0.8, 2.0, 4.5),
    },
    Family.SNOW: {
        "density": (0.8, 2.0, 4.5),
        "radius": (1.6, 2.4, 3.2),
        "opacity": (0.45, 0.65, 0.85),
        "strength": (0.8, 2.0, 4.5),
    },
}


def severity_params(family: Family, severity: SeverityLabel) -> dict[str, float]:
    """Resolved numeric parameters for one (family, severity) combination."""
    if family is Family.CLEAN or severity is SeverityLabel.NONE:
        raise InvalidCombination(
            "clean/none has no parameters; degrading families require a severity"
        )
    level = _SEVERITIES.index(severity)
    return {name: triple[level] for name, triple in _PARAM_TRIPLES[family].items()}


def override_severity_params(
    family: Family, name: str, triple: tuple[float, float, float]
) -> None:
    """Replace one parameter triple; the strength coordinate must stay
    strictly increasing minor -> moderate -> severe."""
    if family is Family.CLEAN:
        raise InvalidCombination("clean has no severity parameters")
    if name not in _PARAM_TRIPLES[family]:
        raise InvalidCombination(f"{family.value} has no parameter {name!r}")
    if len(triple) != 3:
        raise InvalidCombination("expected one value per severity level")
    if name == "strength" and not triple[0] < triple[1] < triple[2]:
        raise InvalidCombination(
            f"strength override {triple} is not strictly increasing"
        )
    _PARAM_TRIPLES[family][name] = tuple(float(v) for v in triple)


@dataclass(frozen=True)
class DistortionSpec:
    """A fully resolved unit of synthesis."""

    label: DistortionLabel
    severity: SeverityLabel
    params: Mapping[str, float] = field(default_factory=dict)
    seed: int = 0

    @property
    def is_clean(self) -> bool:
        return self.label.family is Family.CLEAN


def make_spec(
    family: Family,
    severity: SeverityLabel,
    seed: int = 0,
    subtype: str | None = None,
) -> DistortionSpec:
    if family is Family.CLEAN:
        if severity is not SeverityLabel.NONE:
            raise InvalidCombination("clean regions carry severity none")
        return DistortionSpec(CLEAN_LABEL, SeverityLabel.NONE, {}, seed)
    label = DistortionLabel(family, subtype or default_subtype(family))
    return DistortionSpec(label, severity, severity_params(family, severity), seed)


def clean_spec() -> DistortionSpec:
    return DistortionSpec(CLEAN_LABEL, SeverityLabel.NONE, {}, 0)


# --- operators --------------------------------------------------------------

Operator = Callable[[np.ndarray, Mapping[str, float], np.random.Generator], np.ndarray]

_OPERATORS: dict[tuple[Family, str], Operator] = {}


def register_operator(family: Family, subtype: str, fn: Operator) -> None:
    """Add a synthesis operator; also registers the sub-type name."""
    if subtype not in (CLEAN_SUBTYPE,):
        try:
            register_subtype(family, subtype)
        except InvalidCombination:
            pass  # already the default registered name
    _OPERATORS[(family, subtype)] = fn


def _clamp_u8(x: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(x), 0, 255).astype(np.uint8)


def _luma_gain(x, params, rng):
    return x * params["gain"]


def _contrast(x, params, rng):
    mean = x.mean(axis=(0, 1), keepdims=True)
    return mean + params["scale"] * (x - mean)


def _saturation(x, params, rng):
    # Interpolate toward the per-pixel channel mean: hue is preserved
    # exactly (channel differences scale uniformly) and chroma scales by
    # the factor. Deliberately not luma-weighted, so the change is
    # visible to a luma-based scorer.
    gray = x.mean(axis=2, keepdims=True)
    return gray + params["scale"] * (x - gray)


def _gaussian_blur(x, params, rng):
    return ndimage.gaussian_filter(
        x, sigma=(params["sigma"], params["sigma"], 0.0), mode="reflect"
    )


def _gaussian_noise(x, params, rng):
    return x + rng.normal(0.0, params["sigma"], size=x.shape)


def _oversharpen(x, params, rng):
    blurred = ndimage.gaussian_filter(
        x, sigma=(params["radius"], params["radius"], 0.0), mode="reflect"
    )
    return x + params["amount"] * (x - blurred)


def _haze(x, params, rng):
    t = params["transmission"]
    return x * t + params["airlight"] * (1.0 - t)


def _pixelate(x, params, rng):
    b = int(params["block"])
    h, w = x.shape[:2]
    ph = (b - h % b) % b
    pw = (b - w % b) % b
    padded = np.pad(x, ((0, ph), (0, pw), (0, 0)), mode="edge")
    hh, ww = padded.shape[:2]
    blocks = padded.reshape(hh // b, b, ww // b, b, 3).mean(axis=(1, 3))
    up = np.repeat(np.repeat(blocks, b, axis=0), b, axis=1)
    return up[:h, :w]


_DCT8 = np.array(
    [
        [
            math.sqrt((1.0 if u == 0 else 2.0) / 8.0)
            * math.cos((2 * i + 1) * u * math.pi / 16.0)
            for i in range(8)
        ]
        for u in range(8)
    ]
)

# Classic luminance quantization table (quality 50 baseline).
_QUANT50 = np.array(
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
    dtype=np.float64,
)


def _quant_table(quality: float) -> np.ndarray:
    q = min(max(quality, 1.0), 100.0)
    scale = 5000.0 / q if q < 50.0 else 200.0 - 2.0 * q
    table = np.floor((_QUANT50 * scale + 50.0) / 100.0)
    return np.clip(table, 1.0, 255.0)


def _block_dct(x, params, rng):
    # Pixel-domain compression artifact simulation: blockwise DCT,
    # quantize, inverse. All three channels use the luminance table.
    table = _quant_table(params["quality"])
    h, w = x.shape[:2]
    ph = (8 - h % 8) % 8
    pw = (8 - w % 8) % 8
    padded = np.pad(x, ((0, ph), (0, pw), (0, 0)), mode="edge") - 128.0
    hh, ww = padded.shape[:2]
    out = np.empty_like(padded)
    for c in range(3):
        blocks = (
            padded[:, :, c]
            .reshape(hh // 8, 8, ww // 8, 8)
            .transpose(0, 2, 1, 3)
        )
        coeff = np.einsum("ij,byjk,lk->byil", _DCT8, blocks, _DCT8)
        coeff = np.rint(coeff / table) * table
        rec = np.einsum("ji,byjk,kl->byil", _DCT8, coeff, _DCT8)
        out[:, :, c] = rec.transpose(0, 2, 1, 3).reshape(hh, ww)
    return out[:h, :w] + 128.0


def _splat_alpha(alpha: np.ndarray, ys: np.ndarray, xs: np.ndarray, amount: float):
    h, w = alpha.shape
    yi = np.rint(ys).astype(int)
    xi = np.rint(xs).astype(int)
    keep = (yi >= 0) & (yi < h) & (xi >= 0) & (xi < w)
    np.add.at(alpha, (yi[keep], xi[keep]), amount)


def _rain(x, params, rng):
    h, w = x.shape[:2]
    count = max(1, int(round(params["density"] * h * w / 1000.0)))
    length = params["length"]
    alpha = np.zeros((h, w))
    base_angle = rng.uniform(math.radians(70.0), math.radians(110.0))
    for _ in range(count):
        x0 = rng.uniform(0, w)
        y0 = rng.uniform(0, h)
        theta = base_angle + rng.normal(0.0, 0.05)
        streak_len = length * rng.uniform(0.7, 1.3)
        t = np.arange(0.0, streak_len, 0.5)
        _splat_alpha(
            alpha, y0 + t * math.sin(theta), x0 + t * math.cos(theta), 0.6
        )
    alpha = ndimage.gaussian_filter(alpha, sigma=0.6, mode="constant")
    alpha = np.clip(alpha, 0.0, 1.0) * params["opacity"]
    return x * (1.0 - alpha[:, :, None]) + 235.0 * alpha[:, :, None]


def _snow(x, params, rng):
    h, w = x.shape[:2]
    count = max(1, int(round(params["density"] * h * w / 1000.0)))
    radius = params["radius"]
    alpha = np.zeros((h, w))
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(count):
        cy = rng.uniform(0, h)
        cx = rng.uniform(0, w)
        r = radius * rng.uniform(0.7, 1.3)
        lo_y, hi_y = int(max(0, cy - 3 * r)), int(min(h, cy + 3 * r + 1))
        lo_x, hi_x = int(max(0, cx - 3 * r)), int(min(w, cx + 3 * r + 1))
        if lo_y >= hi_y or lo_x >= hi_x:
            continue
        d2 = (yy[lo_y:hi_y, lo_x:hi_x] - cy) ** 2 + (
            xx[lo_y:hi_y, lo_x:hi_x] - cx
        ) ** 2
        alpha[lo_y:hi_y, lo_x:hi_x] += np.exp(-d2 / (2.0 * (r / 2.0) ** 2))
    alpha = np.clip(alpha, 0.0, 1.0) * params["opacity"]
    return x * (1.0 - alpha[:, :, None]) + 250.0 * alpha[:, :, None]


register_operator(Family.BLUR, "gaussian", _gaussian_blur)
register_operator(Family.BRIGHTNESS, "gain", _luma_gain)
register_operator(Family.DARKEN, "gain", _luma_gain)
register_operator(Family.CONTRAST_STRENGTHEN, "affine", _contrast)
register_operator(Family.CONTRAST_WEAKEN, "affine", _contrast)
register_operator(Family.SATURATION_STRENGTHEN, "chroma_scale", _saturation)
register_operator(Family.SATURATION_WEAKEN, "chroma_scale", _saturation)
register_operator(Family.NOISE, "gaussian", _gaussian_noise)
register_operator(Family.COMPRESSION, "block_dct", _block_dct)
register_operator(Family.PIXELATE, "block", _pixelate)
register_operator(Family.OVERSHARPEN, "unsharp_mask", _oversharpen)
register_operator(Family.HAZE, "uniform_scattering", _haze)
register_operator(Family.RAIN, "procedural_streaks", _rain)
register_operator(Family.SNOW, "procedural_flakes", _snow)


def apply_distortion(image: RasterImage, spec: DistortionSpec) -> RasterImage:
    """Degrade a whole image deterministically; clean specs are identity."""
    if spec.is_clean:
        return image
    key = (spec.label.family, spec.label.subtype)
    try:
        op = _OPERATORS[key]
    except KeyError:
        raise InvalidCombination(
            f"no operator registered for {key[0].value}/{key[1]}"
        ) from None
    rng = np.random.default_rng(spec.seed)
    out = op(image.pixels.astype(np.float64), spec.params, rng)
    return RasterImage(_clamp_u8(out))
