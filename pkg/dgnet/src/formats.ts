/**
 * Readers and writers for the corpus toolkit's file formats: manifests,
 * graph JSON, 16-bit PGM label maps, PPM images, and the prediction CSV.
 */

export const FAMILIES = [
  "blur",
  "brightness",
  "compression",
  "contrast_strengthen",
  "contrast_weaken",
  "darken",
  "haze",
  "noise",
  "oversharpen",
  "pixelate",
  "rain",
  "saturation_strengthen",
  "saturation_weaken",
  "snow",
  "clean",
] as const;

export const SEVERITIES = ["none", "minor", "moderate", "severe"] as const;

export const RELATIONS = [
  "same",
  "slightly_better",
  "slightly_worse",
  "significantly_better",
  "significantly_worse",
] as const;

export const NUM_FAMILIES = FAMILIES.length; // 15
export const NUM_SEVERITIES = SEVERITIES.length; // 4
export const NUM_RELATIONS = RELATIONS.length; // 5

function indexOf(list: readonly string[], value: string, what: string): number {
  const idx = list.indexOf(value);
  if (idx < 0) throw new Error(`unknown ${what}: ${value}`);
  return idx;
}

export interface LabelMap {
  width: number;
  height: number;
  values: Uint16Array; // 0 = unassigned, k = region k
  nRegions: number;
}

export interface RgbImage {
  width: number;
  height: number;
  pixels: Uint8Array; // RGB interleaved
}

function readHeaderToken(buf: Uint8Array, pos: number): [string, number] {
  const isSpace = (c: number) => c === 32 || c === 9 || c === 10 || c === 13;
  while (pos < buf.length) {
    if (isSpace(buf[pos])) pos++;
    else if (buf[pos] === 35 /* # */) {
      while (pos < buf.length && buf[pos] !== 10) pos++;
    } else break;
  }
  const start = pos;
  while (pos < buf.length && !isSpace(buf[pos])) pos++;
  if (start === pos) throw new Error("truncated netpbm header");
  return [Buffer.from(buf.subarray(start, pos)).toString("ascii"), pos];
}

export function parsePgm16(buf: Uint8Array): LabelMap {
  if (buf[0] !== 80 || buf[1] !== 53) throw new Error("not a P5 PGM");
  let pos = 2;
  let token: string;
  [token, pos] = readHeaderToken(buf, pos);
  const width = parseInt(token, 10);
  [token, pos] = readHeaderToken(buf, pos);
  const height = parseInt(token, 10);
  [token, pos] = readHeaderToken(buf, pos);
  const maxval = parseInt(token, 10);
  if (maxval !== 65535) throw new Error(`label maps need maxval 65535, got ${maxval}`);
  pos += 1;
  const expected = width * height * 2;
  if (buf.length - pos < expected) throw new Error("truncated PGM raster");
  const values = new Uint16Array(width * height);
  let max = 0;
  for (let i = 0; i < width * height; i++) {
    const v = (buf[pos + 2 * i] << 8) | buf[pos + 2 * i + 1];
    values[i] = v;
    if (v > max) max = v;
  }
  return { width, height, values, nRegions: max };
}

export function parsePpm(buf: Uint8Array): RgbImage {
  if (buf[0] !== 80 || buf[1] !== 54) throw new Error("not a P6 PPM");
  let pos = 2;
  let token: string;
  [token, pos] = readHeaderToken(buf, pos);
  const width = parseInt(token, 10);
  [token, pos] = readHeaderToken(buf, pos);
  const height = parseInt(token, 10);
  [token, pos] = readHeaderToken(buf, pos);
  const maxval = parseInt(token, 10);
  if (maxval !== 255) throw new Error(`images need maxval 255, got ${maxval}`);
  pos += 1;
  const expected = width * height * 3;
  if (buf.length - pos < expected) throw new Error("truncated PPM raster");
  return { width, height, pixels: buf.slice(pos, pos + expected) };
}

/** Ground truth for one pair, region-indexed (0-based arrays). */
export interface PairTruth {
  pairId: string;
  nRegions: number;
  classNames: string[];
  relation: Int32Array;
  familyA: Int32Array;
  familyT: Int32Array;
  severityA: Int32Array;
  severityT: Int32Array;
  scoreA: Float64Array;
  scoreT: Float64Array;
}

export function parseGraph(text: string): PairTruth {
  const doc = JSON.parse(text);
  if (doc.version !== 1) throw new Error(`unsupported graph version ${doc.version}`);
  const regions: any[] = doc.regions;
  let n = 0;
  for (const r of regions) n = Math.max(n, r.index);
  const truth: PairTruth = {
    pairId: String(doc.pair_id),
    nRegions: n,
    classNames: new Array(n).fill(""),
    relation: new Int32Array(n),
    familyA: new Int32Array(n),
    familyT: new Int32Array(n),
    severityA: new Int32Array(n),
    severityT: new Int32Array(n),
    scoreA: new Float64Array(n),
    scoreT: new Float64Array(n),
  };
  for (const r of regions) {
    const i = r.index - 1;
    const family = indexOf(FAMILIES, r.distortion.family, "family");
    const severity = indexOf(SEVERITIES, r.severity, "severity");
    if (r.side === "A") {
      truth.familyA[i] = family;
      truth.severityA[i] = severity;
      truth.scoreA[i] = r.score;
      truth.classNames[i] = r.class;
    } else {
      truth.familyT[i] = family;
      truth.severityT[i] = severity;
      truth.scoreT[i] = r.score;
    }
  }
  for (const e of doc.distortion_edges) {
    truth.relation[e.index - 1] = indexOf(RELATIONS, e.relation, "relation");
  }
  return truth;
}

export interface ManifestPair {
  pairId: string;
  graph: string;
  anchorImage: string;
  targetImage: string;
  labelMap: string;
}

export interface Manifest {
  split: string;
  globalSeed: number;
  pairs: ManifestPair[];
}

export function parseManifest(text: string): Manifest {
  const doc = JSON.parse(text);
  if (doc.version !== 1) throw new Error(`unsupported manifest version ${doc.version}`);
  return {
    split: doc.split,
    globalSeed: doc.global_seed,
    pairs: doc.pairs.map((p: any) => ({
      pairId: p.pair_id,
      graph: p.graph,
      anchorImage: p.anchor_image,
      targetImage: p.target_image,
      labelMap: p.label_map,
    })),
  };
}

export interface PredictionRow {
  pairId: string;
  regionIndex: number; // 1-based
  relation: number;
  familyA: number;
  familyT: number;
  severityA: number;
  severityT: number;
  scoreA: number;
  scoreT: number;
}

export const PREDICTION_HEADER =
  "pair_id,region_index,relation,dist_A,dist_T,sev_A,sev_T,score_A,score_T";

export function writePredictionsCsv(rows: PredictionRow[]): string {
  const lines = [PREDICTION_HEADER];
  const sorted = rows
    .slice()
    .sort((a, b) =>
      a.pairId === b.pairId ? a.regionIndex - b.regionIndex : a.pairId < b.pairId ? -1 : 1
    );
  for (const r of sorted) {
    lines.push(
      [
        r.pairId,
        r.regionIndex,
        RELATIONS[r.relation],
        FAMILIES[r.familyA],
        FAMILIES[r.familyT],
        SEVERITIES[r.severityA],
        SEVERITIES[r.severityT],
        r.scoreA.toFixed(6),
        r.scoreT.toFixed(6),
      ].join(",")
    );
  }
  return lines.join("\n") + "\n";
}
