#!/usr/bin/env node
/**
 * Thin command line: `dgnet train --manifest M --out DIR [options]`
 * trains on a corpus and writes predictions.csv + training_log.json.
 */

import * as path from "node:path";

import { saveCheckpoint } from "./checkpoint.js";
import { loadCorpus } from "./data.js";
import { DEFAULT_CONFIG, DgNet } from "./model.js";
import { exportPredictions, train, writeTrainingArtifacts } from "./train.js";

function parseArgs(argv: string[]): Map<string, string> {
  const out = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    if (!key.startsWith("--") || i + 1 >= argv.length) {
      throw new Error(`expected --key value pairs, got ${key}`);
    }
    out.set(key.slice(2), argv[i + 1]);
  }
  return out;
}

function main(): void {
  const [command, ...rest] = process.argv.slice(2);
  if (command !== "train") {
    console.error("usage: dgnet train --manifest M --out DIR [--steps N] [--channels C] [--layers L] [--patch P] [--seed S]");
    process.exit(2);
  }
  const args = parseArgs(rest);
  const manifest = args.get("manifest");
  const outDir = args.get("out");
  if (!manifest || !outDir) {
    console.error("train requires --manifest and --out");
    process.exit(2);
  }
  const channels = parseInt(args.get("channels") ?? String(DEFAULT_CONFIG.channels), 10);
  const layers = parseInt(args.get("layers") ?? String(DEFAULT_CONFIG.layers), 10);
  const heads = parseInt(args.get("heads") ?? String(DEFAULT_CONFIG.heads), 10);
  const patch = parseInt(args.get("patch") ?? "8", 10);
  const poolSize = parseInt(args.get("pool") ?? String(DEFAULT_CONFIG.poolSize), 10);
  const seed = parseInt(args.get("seed") ?? "1", 10);
  const steps = parseInt(args.get("steps") ?? "500", 10);

  const corpus = loadCorpus(manifest, {
    patch,
    channels,
    poolSize,
    encoderSeed: seed,
    samplingSeed: seed + 1,
  });
  const model = new DgNet({
    channels,
    layers,
    heads,
    poolSize,
    seed,
    gridH: corpus.grid.gh,
    gridW: corpus.grid.gw,
  });
  console.log(
    `training on ${corpus.examples.length} pairs ` +
      `(${model.store.count()} parameters, ${steps} steps)`
  );
  const result = train(model, corpus.examples, { steps });
  const rows = exportPredictions(model, corpus.examples);
  const paths = writeTrainingArtifacts(outDir, result, rows);
  saveCheckpoint(model.store, path.join(outDir, "model.ckpt"));
  console.log(
    `loss ${result.initialLoss.toFixed(4)} -> ${result.finalLoss.toFixed(4)}; ` +
      `wrote ${paths.predictionsPath}, ${paths.logPath}, and model.ckpt`
  );
}

main();
