/**
 * Corpus loading: turn a manifest directory into network-ready pair
 * examples. Token pool rows are sampled per pair (without replacement,
 * seeded) when the corpus is loaded, so a training run is a pure
 * function of (corpus bytes, seed).
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { PatchEncoder, poolMasks } from "./encoder.js";
import {
  Manifest,
  PairTruth,
  parseGraph,
  parseManifest,
  parsePgm16,
  parsePpm,
} from "./formats.js";
import { PairInput, PairLabels } from "./model.js";
import { Rng } from "./rng.js";
import { Tensor } from "./tensor.js";

export interface PairExample {
  input: PairInput;
  labels: PairLabels;
  truth: PairTruth;
}

export interface CorpusOptions {
  patch: number;
  channels: number;
  poolSize: number;
  encoderSeed: number;
  samplingSeed: number;
}

export function labelsFromTruth(truth: PairTruth): PairLabels {
  return {
    relation: truth.relation,
    familyA: truth.familyA,
    familyT: truth.familyT,
    severityA: truth.severityA,
    severityT: truth.severityT,
    scoreA: truth.scoreA,
    scoreT: truth.scoreT,
  };
}

export function loadCorpus(manifestPath: string, options: CorpusOptions): {
  manifest: Manifest;
  examples: PairExample[];
  encoder: PatchEncoder;
  grid: { gh: number; gw: number };
} {
  const baseDir = path.dirname(manifestPath);
  const manifest = parseManifest(fs.readFileSync(manifestPath, "utf-8"));
  const encoder = new PatchEncoder(options.patch, options.channels, options.encoderSeed);
  const rng = new Rng(options.samplingSeed);
  const examples: PairExample[] = [];
  let grid: { gh: number; gw: number } | null = null;

  for (const pair of manifest.pairs) {
    const labelMap = parsePgm16(fs.readFileSync(path.join(baseDir, pair.labelMap)));
    const anchor = parsePpm(fs.readFileSync(path.join(baseDir, pair.anchorImage)));
    const target = parsePpm(fs.readFileSync(path.join(baseDir, pair.targetImage)));
    const truth = parseGraph(fs.readFileSync(path.join(baseDir, pair.graph), "utf-8"));
    const g = encoder.gridSize(anchor);
    if (grid === null) grid = g;
    if (g.gh !== grid.gh || g.gw !== grid.gw) {
      throw new Error("all corpus images must share one size");
    }
    const masks = poolMasks(
      labelMap.values,
      labelMap.width,
      labelMap.height,
      truth.nRegions,
      options.patch
    );
    const D = g.gh * g.gw;
    const maskData = new Float64Array(truth.nRegions * D);
    for (let i = 0; i < truth.nRegions; i++) maskData.set(masks[i], i * D);
    examples.push({
      input: {
        pairId: truth.pairId,
        featA: encoder.encode(anchor),
        featT: encoder.encode(target),
        masks: new Tensor(maskData, [truth.nRegions, D]),
        tokenIdxA: rng.sampleWithoutReplacement(options.poolSize, truth.nRegions),
        tokenIdxT: rng.sampleWithoutReplacement(options.poolSize, truth.nRegions),
      },
      labels: labelsFromTruth(truth),
      truth,
    });
  }
  if (!grid) throw new Error("empty corpus");
  return { manifest, examples, encoder, grid };
}
