import { describe, expect, it } from "vitest";

import { DgNet, ModelConfig, PairInput } from "../src/model.js";
import { Rng } from "../src/rng.js";
import { Tensor } from "../src/tensor.js";

const GRID = { gridH: 4, gridW: 4 };

function smallConfig(overrides: Partial<ModelConfig> = {}): ModelConfig {
  return {
    channels: 16,
    layers: 2,
    heads: 2,
    poolSize: 128,
    seed: 3,
    ...GRID,
    ...overrides,
  };
}

function syntheticInput(model: DgNet, nRegions: number, seed: number): PairInput {
  const rng = new Rng(seed);
  const D = model.patchCount;
  const C = model.config.channels;
  const feat = (key: number) => {
    const data = new Float64Array(D * C);
    const r = new Rng(key);
    for (let i = 0; i < data.length; i++) data[i] = r.uniform(-1, 1);
    return new Tensor(data, [D, C]);
  };
  const maskData = new Float64Array(nRegions * D);
  for (let i = 0; i < nRegions * D; i++) maskData[i] = rng.next() < 0.4 ? 1.0 : 0.0;
  for (let i = 0; i < nRegions; i++) maskData[i * D + rng.int(D)] = 1.0; // non-empty
  return {
    pairId: `syn-${seed}`,
    featA: feat(seed * 2 + 1),
    featT: feat(seed * 2 + 2),
    masks: new Tensor(maskData, [nRegions, D]),
    tokenIdxA: rng.sampleWithoutReplacement(model.config.poolSize, nRegions),
    tokenIdxT: rng.sampleWithoutReplacement(model.config.poolSize, nRegions),
  };
}

describe("head output shapes", () => {
  // region counts mirror the corpus extremes: single region, typical, maximum
  for (const nRegions of [1, 18, 112]) {
    it(`batch of 1, ${nRegions} regions`, () => {
      const model = new DgNet(smallConfig());
      const outputs = model.forwardBatch([syntheticInput(model, nRegions, 5)]);
      expect(outputs.relation.shape).toEqual([1, nRegions, 5]);
      expect(outputs.distortionA.shape).toEqual([1, nRegions, 15]);
      expect(outputs.distortionT.shape).toEqual([1, nRegions, 15]);
      expect(outputs.severityA.shape).toEqual([1, nRegions, 4]);
      expect(outputs.severityT.shape).toEqual([1, nRegions, 4]);
      expect(outputs.scoreA.shape).toEqual([1, nRegions, 1]);
      expect(outputs.scoreT.shape).toEqual([1, nRegions, 1]);
    });
  }

  it("batch of 2 stacks along the batch dimension", () => {
    const model = new DgNet(smallConfig());
    const outputs = model.forwardBatch([
      syntheticInput(model, 6, 8),
      syntheticInput(model, 6, 9),
    ]);
    expect(outputs.relation.shape).toEqual([2, 6, 5]);
    expect(outputs.scoreT.shape).toEqual([2, 6, 1]);
  });

  it("mixed region counts in one batch are rejected", () => {
    const model = new DgNet(smallConfig());
    expect(() =>
      model.forwardBatch([syntheticInput(model, 3, 1), syntheticInput(model, 4, 2)])
    ).toThrow();
  });
});

describe("architecture behaviors", () => {
  it("score outputs stay inside (0, 1)", () => {
    const model = new DgNet(smallConfig());
    const outputs = model.forwardBatch([syntheticInput(model, 9, 11)]);
    for (const v of outputs.scoreA.data) {
      expect(v).toBeGreaterThan(0);
      expect(v).toBeLessThan(1);
    }
  });

  it("an all-zero mask row yields a zero region feature row", () => {
    const model = new DgNet(smallConfig());
    const input = syntheticInput(model, 3, 13);
    input.masks.data.fill(0, 0, model.patchCount); // region 1 empty
    const fused = model.fuseRegions(input.featA, input.masks, model.poolA, input.tokenIdxA);
    const D = model.patchCount;
    const C = model.config.channels;
    for (let i = 0; i < D * C; i++) expect(Math.abs(fused.data[i])).toBe(0);
    let second = 0;
    for (let i = D * C; i < 2 * D * C; i++) second += Math.abs(fused.data[i]);
    expect(second).toBeGreaterThan(0);
  });

  it("zeroed attention and feed-forward outputs reduce a block to the residual path", () => {
    const model = new DgNet(smallConfig({ layers: 1 }));
    const block = model.blocks[0] as any;
    block.selfAttn.wo.w.data.fill(0);
    block.selfAttn.wo.b.data.fill(0);
    block.crossAttn.wo.w.data.fill(0);
    block.crossAttn.wo.b.data.fill(0);
    block.ff.fc2.w.data.fill(0);
    block.ff.fc2.b.data.fill(0);
    // positional tables are zero-initialized, so decode becomes identity
    const input = syntheticInput(model, 4, 17);
    const regions = model.fuseRegions(input.featA, input.masks, model.poolA, input.tokenIdxA);
    const context = model.projF.forward(input.featT);
    const decoded = model.decode(regions, context, input.tokenIdxA, model.peRegionA);
    // decoded = GAP(regions) exactly
    const D = model.patchCount;
    const C = model.config.channels;
    for (let n = 0; n < 4; n++) {
      for (let c = 0; c < C; c++) {
        let mean = 0;
        for (let d = 0; d < D; d++) mean += regions.data[(n * D + d) * C + c];
        mean /= D;
        expect(decoded.data[n * C + c]).toBeCloseTo(mean, 12);
      }
    }
  });

  it("forward is deterministic for a fixed seed", () => {
    const a = new DgNet(smallConfig());
    const b = new DgNet(smallConfig());
    const outA = a.forwardBatch([syntheticInput(a, 5, 21)]);
    const outB = b.forwardBatch([syntheticInput(b, 5, 21)]);
    expect(Array.from(outA.relation.data)).toEqual(Array.from(outB.relation.data));
  });
});
