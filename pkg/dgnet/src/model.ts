/**
 * Region-pair distortion graph predictor.
 *
 * Per image: a frozen encoder yields a (D, C) feature grid; a learnable
 * 1x1 projection refines it. Each region samples one learnable token
 * plane (a D-vector) from its side's pool, multiplies it with the
 * region's pooled binary mask, projects to C channels (bias-free, so an
 * empty mask stays a zero row), and gates the projected image features.
 *
 * The decoder runs L pre-norm blocks per direction: self-attention over
 * the opposite image's patches, cross-attention with the region stack
 * as queries (each region carries its token's learned embedding plus
 * patch position embeddings), then a feed-forward block, all residual.
 * Global average pooling over patches gives one vector per region, fed
 * to four 3-layer MLP heads: comparative relation (anchor side only),
 * and per-side distortion family, severity, and a sigmoid quality
 * score. Regions only ever meet image features, never each other, so
 * outputs are permutation-equivariant and token gradients stay
 * region-local.
 */

import { poolMasks } from "./encoder.js";
import {
  NUM_FAMILIES,
  NUM_RELATIONS,
  NUM_SEVERITIES,
} from "./formats.js";
import {
  AdamW,
  FeedForward,
  LayerNorm,
  Linear,
  MultiHeadAttention,
  ParamStore,
  PredictionHead,
  xavier,
} from "./nn.js";
import { Rng } from "./rng.js";
import {
  Tensor,
  add,
  backward,
  concatRows,
  crossEntropy,
  expandMid,
  gatherRows,
  l1Loss,
  matmul,
  meanMid,
  mul,
  reshape,
  sigmoid,
  tileBatch,
  weightedSum,
  zeros,
} from "./tensor.js";

export interface ModelConfig {
  channels: number; // C
  gridH: number;
  gridW: number;
  layers: number; // L
  heads: number;
  poolSize: number; // K
  seed: number;
}

export const DEFAULT_CONFIG: Omit<ModelConfig, "gridH" | "gridW"> = {
  channels: 128,
  layers: 4,
  heads: 4,
  poolSize: 128,
  seed: 1,
};

/** One pair, ready for the network. Masks are 0/1 on the feature grid. */
export interface PairInput {
  pairId: string;
  featA: Tensor; // (D, C) constant
  featT: Tensor; // (D, C) constant
  masks: Tensor; // (N_R, D) constant, shared by both sides
  tokenIdxA: number[]; // N_R distinct pool rows
  tokenIdxT: number[];
}

export interface HeadOutputs {
  relation: Tensor; // (B, N_R, 5)
  distortionA: Tensor; // (B, N_R, 15)
  distortionT: Tensor;
  severityA: Tensor; // (B, N_R, 4)
  severityT: Tensor;
  scoreA: Tensor; // (B, N_R, 1), sigmoid
  scoreT: Tensor;
}

class DecoderBlock {
  lnImg: LayerNorm;
  selfAttn: MultiHeadAttention;
  lnQuery: LayerNorm;
  lnContext: LayerNorm;
  crossAttn: MultiHeadAttention;
  lnFf: LayerNorm;
  ff: FeedForward;

  constructor(store: ParamStore, name: string, dim: number, heads: number, rng: Rng) {
    this.lnImg = new LayerNorm(store, `${name}.ln_img`, dim);
    this.selfAttn = new MultiHeadAttention(store, `${name}.self_attn`, dim, heads, rng);
    this.lnQuery = new LayerNorm(store, `${name}.ln_query`, dim);
    this.lnContext = new LayerNorm(store, `${name}.ln_context`, dim);
    this.crossAttn = new MultiHeadAttention(store, `${name}.cross_attn`, dim, heads, rng);
    this.lnFf = new LayerNorm(store, `${name}.ln_ff`, dim);
    this.ff = new FeedForward(store, `${name}.ff`, dim, rng);
  }
}

export class DgNet {
  readonly config: ModelConfig;
  readonly store = new ParamStore();
  readonly poolA: Tensor; // (K, D)
  readonly poolT: Tensor;
  readonly tokenProj: Tensor; // (1, C), bias-free
  readonly projF: Linear;
  readonly pePatch: Tensor; // (D, C), zero-init
  readonly peRegionA: Tensor; // (K, C), zero-init, indexed by token id
  readonly peRegionT: Tensor;
  readonly blocks: DecoderBlock[];
  readonly relationHead: PredictionHead;
  readonly distortionHead: PredictionHead;
  readonly severityHead: PredictionHead;
  readonly scoreHead: PredictionHead;

  constructor(config: ModelConfig) {
    this.config = config;
    const { channels: C, poolSize: K, gridH, gridW } = config;
    const D = gridH * gridW;
    const rng = new Rng(config.seed);

    const tokenInit = (name: string) => {
      const data = new Float64Array(K * D);
      for (let i = 0; i < data.length; i++) data[i] = rng.gaussian() * 0.5 + 1.0;
      return this.store.register(name, new Tensor(data, [K, D]));
    };
    this.poolA = tokenInit("pool_a");
    this.poolT = tokenInit("pool_t");
    this.tokenProj = xavier(this.store, "token_proj", 1, C, rng);
    this.projF = new Linear(this.store, "proj_f", C, C, rng);
    this.pePatch = this.store.register("pe_patch", zeros([D, C]));
    this.peRegionA = this.store.register("pe_region_a", zeros([K, C]));
    this.peRegionT = this.store.register("pe_region_t", zeros([K, C]));
    this.blocks = [];
    for (let l = 0; l < config.layers; l++) {
      this.blocks.push(new DecoderBlock(this.store, `block${l}`, C, config.heads, rng));
    }
    this.relationHead = new PredictionHead(this.store, "head_rel", C, NUM_RELATIONS, rng);
    this.distortionHead = new PredictionHead(this.store, "head_dist", C, NUM_FAMILIES, rng);
    this.severityHead = new PredictionHead(this.store, "head_sev", C, NUM_SEVERITIES, rng);
    this.scoreHead = new PredictionHead(this.store, "head_score", C, 1, rng);
  }

  get patchCount(): number {
    return this.config.gridH * this.config.gridW;
  }

  /** Mask tokens, project to C channels, gate the projected features. */
  fuseRegions(feat: Tensor, masks: Tensor, pool: Tensor, tokenIdx: number[]): Tensor {
    const D = this.patchCount;
    const tokens = gatherRows(pool, tokenIdx); // (N, D)
    const masked = mul(tokens, masks); // (N, D)
    const projected = matmul(reshape(masked, [tokenIdx.length, D, 1]), this.tokenProj); // (N, D, C)
    return mul(projected, this.projF.forward(feat)); // gate with (D, C)
  }

  /**
   * Decode one direction: region features from image j attend to image
   * k's patches. Returns per-region vectors (N, C).
   */
  decode(regionFeats: Tensor, contextFeat: Tensor, tokenIdx: number[], peRegion: Tensor): Tensor {
    const N = tokenIdx.length;
    const D = this.patchCount;
    let ximg = contextFeat; // (D, C)
    let xreg = regionFeats; // (N, D, C)
    const peReg = gatherRows(peRegion, tokenIdx); // (N, C)
    for (const block of this.blocks) {
      ximg = add(ximg, this.pePatch);
      const imgNormed = block.lnImg.forward(ximg);
      ximg = add(ximg, block.selfAttn.forward(imgNormed, imgNormed, imgNormed));
      xreg = add(add(xreg, this.pePatch), expandMid(peReg, D));
      const context = tileBatch(reshape(block.lnContext.forward(ximg), [1, D, this.config.channels]), N);
      xreg = add(xreg, block.crossAttn.forward(block.lnQuery.forward(xreg), context, context));
      xreg = add(xreg, block.ff.forward(block.lnFf.forward(xreg)));
    }
    return meanMid(xreg); // (N, C)
  }

  /** Forward one pair; per-head tensors are (N_R, c). */
  forwardPair(input: PairInput): {
    relation: Tensor;
    distortionA: Tensor;
    distortionT: Tensor;
    severityA: Tensor;
    severityT: Tensor;
    scoreA: Tensor;
    scoreT: Tensor;
  } {
    const featA = this.projF.forward(input.featA);
    const featT = this.projF.forward(input.featT);
    const regionsA = this.fuseRegions(input.featA, input.masks, this.poolA, input.tokenIdxA);
    const regionsT = this.fuseRegions(input.featT, input.masks, this.poolT, input.tokenIdxT);
    // anchor regions query the target image and vice versa
    const gAnchor = this.decode(regionsA, featT, input.tokenIdxA, this.peRegionA);
    const gTarget = this.decode(regionsT, featA, input.tokenIdxT, this.peRegionT);
    return {
      relation: this.relationHead.forward(gAnchor),
      distortionA: this.distortionHead.forward(gAnchor),
      distortionT: this.distortionHead.forward(gTarget),
      severityA: this.severityHead.forward(gAnchor),
      severityT: this.severityHead.forward(gTarget),
      scoreA: sigmoid(this.scoreHead.forward(gAnchor)),
      scoreT: sigmoid(this.scoreHead.forward(gTarget)),
    };
  }

  /** Forward a batch of pairs sharing one region count: (B, N_R, c) heads. */
  forwardBatch(inputs: PairInput[]): HeadOutputs {
    const B = inputs.length;
    const N = inputs[0].tokenIdxA.length;
    for (const input of inputs) {
      if (input.tokenIdxA.length !== N || input.tokenIdxT.length !== N) {
        throw new Error("all pairs in a batch must share one region count");
      }
    }
    const per = inputs.map((input) => this.forwardPair(input));
    const stack = (pick: (p: (typeof per)[0]) => Tensor, width: number) =>
      reshape(concatRows(per.map(pick)), [B, N, width]);
    return {
      relation: stack((p) => p.relation, NUM_RELATIONS),
      distortionA: stack((p) => p.distortionA, NUM_FAMILIES),
      distortionT: stack((p) => p.distortionT, NUM_FAMILIES),
      severityA: stack((p) => p.severityA, NUM_SEVERITIES),
      severityT: stack((p) => p.severityT, NUM_SEVERITIES),
      scoreA: stack((p) => p.scoreA, 1),
      scoreT: stack((p) => p.scoreT, 1),
    };
  }
}

export interface LossWeights {
  relation: number; // lambda_1
  distortion: number; // lambda_2
  severity: number; // lambda_3
  score: number; // lambda_4
}

export const DEFAULT_LOSS_WEIGHTS: LossWeights = {
  relation: 0.1,
  distortion: 1.0,
  severity: 0.1,
  score: 1.0,
};

export interface PairLabels {
  relation: Int32Array; // (N_R,)
  familyA: Int32Array;
  familyT: Int32Array;
  severityA: Int32Array;
  severityT: Int32Array;
  scoreA: Float64Array;
  scoreT: Float64Array;
}

export interface LossBreakdown {
  total: Tensor;
  relation: number;
  distortion: number;
  severity: number;
  score: number;
}

function concatInt(parts: Int32Array[]): number[] {
  const out: number[] = [];
  for (const p of parts) for (const v of p) out.push(v);
  return out;
}

function concatFloat(parts: Float64Array[]): Float64Array {
  const total = parts.reduce((a, p) => a + p.length, 0);
  const out = new Float64Array(total);
  let off = 0;
  for (const p of parts) {
    out.set(p, off);
    off += p.length;
  }
  return out;
}

/**
 * Composite objective: cross-entropy for relation, distortion, and
 * severity (the latter two pooled over both sides under one weight
 * each) plus mean absolute error on both sides' scores.
 */
export function computeLoss(
  outputs: HeadOutputs,
  labels: PairLabels[],
  weights: LossWeights = DEFAULT_LOSS_WEIGHTS
): LossBreakdown {
  const B = outputs.relation.shape[0];
  const N = outputs.relation.shape[1];
  if (labels.length !== B) throw new Error("one label set per batch entry required");
  for (const l of labels) {
    if (l.relation.length !== N) throw new Error("label rows must match N_R");
  }
  const flat = (t: Tensor, width: number) => reshape(t, [B * N, width]);

  const relationLoss = crossEntropy(
    flat(outputs.relation, NUM_RELATIONS),
    concatInt(labels.map((l) => l.relation))
  );
  const distortionLoss = crossEntropy(
    concatRows([flat(outputs.distortionA, NUM_FAMILIES), flat(outputs.distortionT, NUM_FAMILIES)]),
    concatInt([...labels.map((l) => l.familyA), ...labels.map((l) => l.familyT)])
  );
  const severityLoss = crossEntropy(
    concatRows([flat(outputs.severityA, NUM_SEVERITIES), flat(outputs.severityT, NUM_SEVERITIES)]),
    concatInt([...labels.map((l) => l.severityA), ...labels.map((l) => l.severityT)])
  );
  const scoreLoss = l1Loss(
    concatRows([flat(outputs.scoreA, 1), flat(outputs.scoreT, 1)]),
    concatFloat([...labels.map((l) => l.scoreA), ...labels.map((l) => l.scoreT)])
  );
  const total = weightedSum([
    [relationLoss, weights.relation],
    [distortionLoss, weights.distortion],
    [severityLoss, weights.severity],
    [scoreLoss, weights.score],
  ]);
  return {
    total,
    relation: relationLoss.item(),
    distortion: distortionLoss.item(),
    severity: severityLoss.item(),
    score: scoreLoss.item(),
  };
}

export { AdamW, ParamStore, backward, poolMasks };
