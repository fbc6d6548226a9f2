/**
 * End-to-end: generate a 4-pair micro-corpus with the corpus toolkit's
 * CLI, overfit the model on it, export predictions, and push them back
 * through the toolkit's evaluator. The trained model must beat the
 * random baseline on distortion accuracy over the training pairs.
 */

import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { beforeAll, describe, expect, it } from "vitest";

import { loadCorpus } from "../src/data.js";
import { DgNet } from "../src/model.js";
import { exportPredictions, train, writeTrainingArtifacts } from "../src/train.js";

const PYTHON = process.env.DGNET_PYTHON ?? "python3";

function runToolkit(args: string[], cwd: string): void {
  const result = spawnSync(PYTHON, ["-m", "distgraph", ...args], {
    cwd,
    encoding: "utf-8",
  });
  if (result.status !== 0) {
    throw new Error(
      `distgraph ${args.join(" ")} failed (${result.status}):\n${result.stdout}\n${result.stderr}`
    );
  }
}

describe("overfit and evaluate through the corpus toolkit", () => {
  let workDir: string;

  beforeAll(() => {
    workDir = fs.mkdtempSync(path.join(os.tmpdir(), "dgnet-e2e-"));
    runToolkit(
      [
        "synth",
        "--out", "corpus",
        "--split", "hard",
        "--pairs", "4",
        "--seed", "5",
        "--scene-count", "2",
      ],
      workDir
    );
  });

  it("drops below 10% of the initial loss within 500 steps and beats random", () => {
    const manifestPath = path.join(workDir, "corpus", "manifest.json");
    const corpus = loadCorpus(manifestPath, {
      patch: 16,
      channels: 32,
      poolSize: 32,
      encoderSeed: 11,
      samplingSeed: 12,
    });
    expect(corpus.examples.length).toBe(4);

    const model = new DgNet({
      channels: 32,
      layers: 2,
      heads: 2,
      poolSize: 32,
      seed: 11,
      gridH: corpus.grid.gh,
      gridW: corpus.grid.gw,
    });
    const result = train(model, corpus.examples, {
      steps: 500,
      lr: 2e-3,
      batchSize: 4,
      logEvery: 50,
    });
    expect(result.finalLoss).toBeLessThan(0.1 * result.initialLoss);
    expect(Number.isFinite(result.finalLoss)).toBe(true);

    const rows = exportPredictions(model, corpus.examples);
    const artifacts = writeTrainingArtifacts(path.join(workDir, "run"), result, rows);
    expect(fs.existsSync(artifacts.logPath)).toBe(true);

    // strict evaluation: exit 0 proves the export covers every region
    runToolkit(
      [
        "eval",
        "--manifest", manifestPath,
        "--predictions", artifacts.predictionsPath,
        "--out", path.join(workDir, "eval-model"),
      ],
      workDir
    );
    runToolkit(
      [
        "eval",
        "--manifest", manifestPath,
        "--random-baseline",
        "--seed", "1",
        "--out", path.join(workDir, "eval-random"),
      ],
      workDir
    );
    const modelReport = JSON.parse(
      fs.readFileSync(path.join(workDir, "eval-model", "report.json"), "utf-8")
    );
    const randomReport = JSON.parse(
      fs.readFileSync(path.join(workDir, "eval-random", "report.json"), "utf-8")
    );
    expect(modelReport.distortion.accuracy).toBeGreaterThan(
      randomReport.distortion.accuracy
    );
  });
});
