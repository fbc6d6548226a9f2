import { describe, expect, it } from "vitest";

import {
  DEFAULT_LOSS_WEIGHTS,
  DgNet,
  ModelConfig,
  PairInput,
  PairLabels,
  computeLoss,
} from "../src/model.js";
import { Rng } from "../src/rng.js";
import { Tensor, backward, gatherRows, l1Loss } from "../src/tensor.js";

function smallConfig(overrides: Partial<ModelConfig> = {}): ModelConfig {
  return {
    channels: 16,
    layers: 1,
    heads: 2,
    poolSize: 24,
    seed: 5,
    gridH: 3,
    gridW: 3,
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
  for (let i = 0; i < nRegions * D; i++) maskData[i] = rng.next() < 0.5 ? 1.0 : 0.0;
  for (let i = 0; i < nRegions; i++) maskData[i * D + rng.int(D)] = 1.0;
  return {
    pairId: `syn-${seed}`,
    featA: feat(seed * 2 + 1),
    featT: feat(seed * 2 + 2),
    masks: new Tensor(maskData, [nRegions, D]),
    tokenIdxA: rng.sampleWithoutReplacement(model.config.poolSize, nRegions),
    tokenIdxT: rng.sampleWithoutReplacement(model.config.poolSize, nRegions),
  };
}

function syntheticLabels(nRegions: number, seed: number): PairLabels {
  const rng = new Rng(seed);
  const pick = (bound: number) => rng.int(bound);
  return {
    relation: Int32Array.from({ length: nRegions }, () => pick(5)),
    familyA: Int32Array.from({ length: nRegions }, () => pick(15)),
    familyT: Int32Array.from({ length: nRegions }, () => pick(15)),
    severityA: Int32Array.from({ length: nRegions }, () => pick(4)),
    severityT: Int32Array.from({ length: nRegions }, () => pick(4)),
    scoreA: Float64Array.from({ length: nRegions }, () => rng.next()),
    scoreT: Float64Array.from({ length: nRegions }, () => rng.next()),
  };
}

function lossFor(model: DgNet, input: PairInput, labels: PairLabels): number {
  return computeLoss(model.forwardBatch([input]), [labels]).total.item();
}

describe("gradient checks against finite differences", () => {
  it("head parameters match central differences (rel err < 1e-3)", () => {
    const model = new DgNet(smallConfig());
    const input = syntheticInput(model, 4, 9);
    const labels = syntheticLabels(4, 10);

    model.store.zeroGrads();
    const loss = computeLoss(model.forwardBatch([input]), [labels]).total;
    backward(loss);

    const eps = 1e-5;
    const probe = new Rng(77);
    for (const name of [
      "head_rel.fc1.w",
      "head_rel.fc3.b",
      "head_dist.fc2.w",
      "head_sev.fc1.b",
      "head_score.fc3.w",
      "head_dist.ln1.gamma",
    ]) {
      const p = model.store.get(name);
      const auto = p.grad ?? new Float64Array(p.size);
      for (let trial = 0; trial < 6; trial++) {
        const i = probe.int(p.size);
        const keep = p.data[i];
        p.data[i] = keep + eps;
        const up = lossFor(model, input, labels);
        p.data[i] = keep - eps;
        const down = lossFor(model, input, labels);
        p.data[i] = keep;
        const numeric = (up - down) / (2 * eps);
        const denom = Math.max(1e-6, Math.abs(numeric) + Math.abs(auto[i]));
        expect(
          Math.abs(numeric - auto[i]) / denom,
          `${name}[${i}]`
        ).toBeLessThan(1e-3);
      }
    }
  });

  it("token gradients are isolated to the touched region", () => {
    const model = new DgNet(smallConfig());
    const n = 5;
    const input = syntheticInput(model, n, 21);
    const target = 2; // only region index 2 (0-based) contributes to the loss

    model.store.zeroGrads();
    const outputs = model.forwardPair(input);
    const row = gatherRows(outputs.relation, [target]);
    const loss = l1Loss(row, [9, 9, 9, 9, 9]);
    backward(loss);

    const poolGradA = model.store.get("pool_a").grad;
    expect(poolGradA).not.toBeNull();
    const D = model.patchCount;
    for (let k = 0; k < model.config.poolSize; k++) {
      let magnitude = 0;
      for (let d = 0; d < D; d++) magnitude += Math.abs(poolGradA![k * D + d]);
      if (k === input.tokenIdxA[target]) {
        expect(magnitude).toBeGreaterThan(0);
      } else {
        expect(magnitude).toBe(0); // exact zero, sampled or not
      }
    }
    // the relation head reads only the anchor-side decoding
    const poolGradT = model.store.get("pool_t").grad;
    if (poolGradT) {
      expect(Math.max(...poolGradT.map(Math.abs))).toBe(0);
    }
  });

  it("permuting regions permutes outputs and preserves the loss", () => {
    const model = new DgNet(smallConfig());
    const n = 6;
    const input = syntheticInput(model, n, 33);
    const labels = syntheticLabels(n, 34);
    const perm = [3, 0, 5, 1, 4, 2];

    const D = model.patchCount;
    const maskData = new Float64Array(n * D);
    for (let i = 0; i < n; i++) {
      maskData.set(input.masks.data.subarray(perm[i] * D, (perm[i] + 1) * D), i * D);
    }
    const permuted: PairInput = {
      pairId: input.pairId,
      featA: input.featA,
      featT: input.featT,
      masks: new Tensor(maskData, [n, D]),
      tokenIdxA: perm.map((j) => input.tokenIdxA[j]),
      tokenIdxT: perm.map((j) => input.tokenIdxT[j]),
    };
    const permutedLabels: PairLabels = {
      relation: Int32Array.from(perm, (j) => labels.relation[j]),
      familyA: Int32Array.from(perm, (j) => labels.familyA[j]),
      familyT: Int32Array.from(perm, (j) => labels.familyT[j]),
      severityA: Int32Array.from(perm, (j) => labels.severityA[j]),
      severityT: Int32Array.from(perm, (j) => labels.severityT[j]),
      scoreA: Float64Array.from(perm, (j) => labels.scoreA[j]),
      scoreT: Float64Array.from(perm, (j) => labels.scoreT[j]),
    };

    const base = model.forwardPair(input);
    const shuffled = model.forwardPair(permuted);
    for (let i = 0; i < n; i++) {
      for (let c = 0; c < 5; c++) {
        expect(shuffled.relation.data[i * 5 + c]).toBeCloseTo(
          base.relation.data[perm[i] * 5 + c],
          9
        );
      }
      expect(shuffled.scoreT.data[i]).toBeCloseTo(base.scoreT.data[perm[i]], 9);
    }
    const lossBase = lossFor(model, input, labels);
    const lossPerm = lossFor(model, permuted, permutedLabels);
    expect(lossPerm).toBeCloseTo(lossBase, 9);
  });
});

describe("loss function", () => {
  it("total equals the weighted sum of components", () => {
    const model = new DgNet(smallConfig());
    const input = syntheticInput(model, 4, 41);
    const labels = syntheticLabels(4, 42);
    const breakdown = computeLoss(model.forwardBatch([input]), [labels]);
    const recomposed =
      DEFAULT_LOSS_WEIGHTS.relation * breakdown.relation +
      DEFAULT_LOSS_WEIGHTS.distortion * breakdown.distortion +
      DEFAULT_LOSS_WEIGHTS.severity * breakdown.severity +
      DEFAULT_LOSS_WEIGHTS.score * breakdown.score;
    expect(Math.abs(breakdown.total.item() - recomposed)).toBeLessThan(1e-6);
  });

  it("doubling the score weight doubles its contribution exactly", () => {
    const model = new DgNet(smallConfig());
    const input = syntheticInput(model, 3, 51);
    const labels = syntheticLabels(3, 52);
    const outputs = model.forwardBatch([input]);
    const w1 = computeLoss(outputs, [labels], { ...DEFAULT_LOSS_WEIGHTS, score: 1.0 });
    const outputs2 = model.forwardBatch([input]);
    const w2 = computeLoss(outputs2, [labels], { ...DEFAULT_LOSS_WEIGHTS, score: 2.0 });
    expect(w2.total.item() - w1.total.item()).toBeCloseTo(w1.score, 9);
  });

  it("uniform logits cost ln(classes) per classification term", () => {
    const model = new DgNet(smallConfig());
    const n = 4;
    const input = syntheticInput(model, n, 61);
    const labels = syntheticLabels(n, 62);
    const outputs = model.forwardBatch([input]);
    // flatten all logits to zero: uniform distributions
    for (const t of [
      outputs.relation,
      outputs.distortionA,
      outputs.distortionT,
      outputs.severityA,
      outputs.severityT,
    ]) {
      t.data.fill(0);
    }
    const breakdown = computeLoss(outputs, [labels]);
    expect(breakdown.relation).toBeCloseTo(Math.log(5), 12);
    expect(breakdown.distortion).toBeCloseTo(Math.log(15), 12);
    expect(breakdown.severity).toBeCloseTo(Math.log(4), 12);
  });
});
