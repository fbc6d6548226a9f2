/**
 * Training loop: decoupled-weight-decay Adam over the composite loss,
 * per-step component logging, a divergence guard, and prediction export
 * in the evaluator's CSV format.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { PairExample } from "./data.js";
import { PredictionRow, writePredictionsCsv } from "./formats.js";
import {
  DEFAULT_LOSS_WEIGHTS,
  DgNet,
  HeadOutputs,
  LossWeights,
  computeLoss,
} from "./model.js";
import { AdamW } from "./nn.js";
import { Tensor, backward } from "./tensor.js";

export interface TrainOptions {
  steps: number;
  lr: number;
  weightDecay: number;
  weights: LossWeights;
  batchSize: number;
  logEvery: number;
}

export const DEFAULT_TRAIN_OPTIONS: TrainOptions = {
  steps: 500,
  lr: 1e-4,
  weightDecay: 0.01,
  weights: DEFAULT_LOSS_WEIGHTS,
  batchSize: 2,
  logEvery: 25,
};

export interface StepLog {
  step: number;
  loss: number;
  relation: number;
  distortion: number;
  severity: number;
  score: number;
}

export interface TrainResult {
  initialLoss: number;
  finalLoss: number;
  log: StepLog[];
}

/**
 * Mean total loss over a set of pairs, without touching gradients.
 */
export function evaluateLoss(
  model: DgNet,
  examples: PairExample[],
  weights: LossWeights
): number {
  let total = 0;
  for (const ex of examples) {
    const outputs = model.forwardBatch([ex.input]);
    total += computeLoss(outputs, [ex.labels], weights).total.item();
  }
  return total / examples.length;
}

export function train(
  model: DgNet,
  examples: PairExample[],
  options: Partial<TrainOptions> = {}
): TrainResult {
  const opts = { ...DEFAULT_TRAIN_OPTIONS, ...options };
  const optimizer = new AdamW({ lr: opts.lr, weightDecay: opts.weightDecay });
  const log: StepLog[] = [];
  const initialLoss = evaluateLoss(model, examples, opts.weights);

  let cursor = 0;
  for (let step = 1; step <= opts.steps; step++) {
    const batch: PairExample[] = [];
    for (let i = 0; i < Math.min(opts.batchSize, examples.length); i++) {
      batch.push(examples[cursor]);
      cursor = (cursor + 1) % examples.length;
    }
    model.store.zeroGrads();
    let lossValue = 0;
    let rel = 0;
    let dist = 0;
    let sev = 0;
    let score = 0;
    for (const ex of batch) {
      const outputs = model.forwardBatch([ex.input]);
      const breakdown = computeLoss(outputs, [ex.labels], opts.weights);
      // averaging over the batch: scale each pair's contribution
      const scaled = scaleLoss(breakdown.total, 1.0 / batch.length);
      backward(scaled);
      lossValue += breakdown.total.item() / batch.length;
      rel += breakdown.relation / batch.length;
      dist += breakdown.distortion / batch.length;
      sev += breakdown.severity / batch.length;
      score += breakdown.score / batch.length;
    }
    if (!Number.isFinite(lossValue)) {
      throw new Error(`training diverged at step ${step}: loss ${lossValue}`);
    }
    optimizer.step(model.store);
    if (step === 1 || step % opts.logEvery === 0 || step === opts.steps) {
      log.push({ step, loss: lossValue, relation: rel, distortion: dist, severity: sev, score });
    }
  }
  const finalLoss = evaluateLoss(model, examples, opts.weights);
  return { initialLoss, finalLoss, log };
}

function scaleLoss(loss: Tensor, factor: number): Tensor {
  // weightedSum keeps the graph; avoids importing scale for a scalar
  const scaled = new Tensor(Float64Array.of(loss.item() * factor), [1], true);
  scaled.parents = [loss];
  scaled.backwardFn = () => {
    loss.ensureGrad()[0] += scaled.grad![0] * factor;
  };
  return scaled;
}

function argmaxRows(t: Tensor, row: number, width: number): number {
  let best = 0;
  let bestVal = -Infinity;
  for (let c = 0; c < width; c++) {
    const v = t.data[row * width + c];
    if (v > bestVal) {
      bestVal = v;
      best = c;
    }
  }
  return best;
}

/** Greedy per-head readout of one forward pass into CSV rows. */
export function exportPredictions(model: DgNet, examples: PairExample[]): PredictionRow[] {
  const rows: PredictionRow[] = [];
  for (const ex of examples) {
    const o: HeadOutputs = model.forwardBatch([ex.input]);
    const n = ex.input.tokenIdxA.length;
    for (let i = 0; i < n; i++) {
      rows.push({
        pairId: ex.input.pairId,
        regionIndex: i + 1,
        relation: argmaxRows(o.relation, i, o.relation.shape[2]),
        familyA: argmaxRows(o.distortionA, i, o.distortionA.shape[2]),
        familyT: argmaxRows(o.distortionT, i, o.distortionT.shape[2]),
        severityA: argmaxRows(o.severityA, i, o.severityA.shape[2]),
        severityT: argmaxRows(o.severityT, i, o.severityT.shape[2]),
        scoreA: o.scoreA.data[i],
        scoreT: o.scoreT.data[i],
      });
    }
  }
  return rows;
}

export function writeTrainingArtifacts(
  outDir: string,
  result: TrainResult,
  rows: PredictionRow[]
): { predictionsPath: string; logPath: string } {
  fs.mkdirSync(outDir, { recursive: true });
  const predictionsPath = path.join(outDir, "predictions.csv");
  const logPath = path.join(outDir, "training_log.json");
  fs.writeFileSync(predictionsPath, writePredictionsCsv(rows));
  fs.writeFileSync(
    logPath,
    JSON.stringify(
      { initial_loss: result.initialLoss, final_loss: result.finalLoss, steps: result.log },
      null,
      2
    ) + "\n"
  );
  return { predictionsPath, logPath };
}
