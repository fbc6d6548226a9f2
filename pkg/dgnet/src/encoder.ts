/**
 * Frozen image encoder: a seeded random linear map from p x p RGB
 * patches to C channels. Deterministic and dependency-free; a
 * pretrained backbone could fill the same contract (image -> feature
 * grid) but the model makes no claim to its accuracy.
 */

import { RgbImage } from "./formats.js";
import { Rng } from "./rng.js";
import { Tensor } from "./tensor.js";

export class PatchEncoder {
  readonly patch: number;
  readonly channels: number;
  private readonly weight: Float64Array; // (patch*patch*3, channels)

  constructor(patch: number, channels: number, seed: number) {
    this.patch = patch;
    this.channels = channels;
    const fanIn = patch * patch * 3;
    const rng = new Rng(seed);
    this.weight = new Float64Array(fanIn * channels);
    const std = 1.0 / Math.sqrt(fanIn);
    for (let i = 0; i < this.weight.length; i++) {
      this.weight[i] = rng.gaussian() * std;
    }
  }

  gridSize(image: { width: number; height: number }): { gh: number; gw: number } {
    if (image.width % this.patch !== 0 || image.height % this.patch !== 0) {
      throw new Error(
        `image ${image.width}x${image.height} not divisible by patch ${this.patch}`
      );
    }
    return { gh: image.height / this.patch, gw: image.width / this.patch };
  }

  /** Feature grid as a constant (D, C) tensor, D = gh * gw. */
  encode(image: RgbImage): Tensor {
    const { gh, gw } = this.gridSize(image);
    const p = this.patch;
    const fanIn = p * p * 3;
    const data = new Float64Array(gh * gw * this.channels);
    const patchBuf = new Float64Array(fanIn);
    for (let gy = 0; gy < gh; gy++) {
      for (let gx = 0; gx < gw; gx++) {
        let k = 0;
        for (let y = 0; y < p; y++) {
          const row = ((gy * p + y) * image.width + gx * p) * 3;
          for (let x = 0; x < p * 3; x++) patchBuf[k++] = image.pixels[row + x] / 255.0;
        }
        const outOff = (gy * gw + gx) * this.channels;
        for (let i = 0; i < fanIn; i++) {
          const v = patchBuf[i];
          if (v === 0) continue;
          const wrow = i * this.channels;
          for (let c = 0; c < this.channels; c++) {
            data[outOff + c] += v * this.weight[wrow + c];
          }
        }
      }
    }
    return new Tensor(data, [gh * gw, this.channels]);
  }
}

/** Max-pool region masks onto the feature grid: (nRegions, gh*gw), 0/1. */
export function poolMasks(
  labels: Uint16Array,
  width: number,
  height: number,
  nRegions: number,
  patch: number
): Float64Array[] {
  const gh = Math.floor(height / patch);
  const gw = Math.floor(width / patch);
  const masks: Float64Array[] = [];
  for (let i = 0; i < nRegions; i++) masks.push(new Float64Array(gh * gw));
  for (let y = 0; y < gh * patch; y++) {
    const gy = Math.floor(y / patch);
    for (let x = 0; x < gw * patch; x++) {
      const v = labels[y * width + x];
      if (v >= 1 && v <= nRegions) {
        masks[v - 1][gy * gw + Math.floor(x / patch)] = 1.0;
      }
    }
  }
  return masks;
}
