/**
 * Checkpoints: every registered parameter, written atomically (temp
 * file then rename). Values are base64-packed Float64 buffers inside a
 * JSON envelope, which keeps files self-describing and round-trips
 * bit-exactly at toy scale.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { ParamStore } from "./nn.js";

interface CheckpointDoc {
  format: "dgnet-checkpoint";
  version: 1;
  params: Record<string, { shape: number[]; data: string }>;
}

export function saveCheckpoint(store: ParamStore, filePath: string): void {
  const doc: CheckpointDoc = { format: "dgnet-checkpoint", version: 1, params: {} };
  for (const [name, t] of store.params) {
    doc.params[name] = {
      shape: t.shape.slice(),
      data: Buffer.from(t.data.buffer, t.data.byteOffset, t.data.byteLength).toString(
        "base64"
      ),
    };
  }
  fs.mkdirSync(path.dirname(filePath), { recursive: true });
  const tmp = `${filePath}.tmp-${process.pid}`;
  fs.writeFileSync(tmp, JSON.stringify(doc));
  fs.renameSync(tmp, filePath);
}

export function loadCheckpoint(store: ParamStore, filePath: string): void {
  const doc = JSON.parse(fs.readFileSync(filePath, "utf-8")) as CheckpointDoc;
  if (doc.format !== "dgnet-checkpoint" || doc.version !== 1) {
    throw new Error("not a dgnet checkpoint");
  }
  for (const [name, t] of store.params) {
    const entry = doc.params[name];
    if (!entry) throw new Error(`checkpoint is missing parameter ${name}`);
    if (entry.shape.join() !== t.shape.join()) {
      throw new Error(
        `checkpoint shape mismatch for ${name}: ${entry.shape} vs ${t.shape}`
      );
    }
    const raw = Buffer.from(entry.data, "base64");
    const values = new Float64Array(raw.buffer, raw.byteOffset, raw.byteLength / 8);
    t.data.set(values);
  }
}
