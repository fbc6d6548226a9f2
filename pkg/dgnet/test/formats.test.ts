import { describe, expect, it } from "vitest";

import {
  FAMILIES,
  PREDICTION_HEADER,
  RELATIONS,
  SEVERITIES,
  parseGraph,
  parseManifest,
  parsePgm16,
  parsePpm,
  writePredictionsCsv,
} from "../src/formats.js";
import { poolMasks } from "../src/encoder.js";

function pgmBytes(width: number, height: number, values: number[]): Uint8Array {
  const header = Buffer.from(`P5\n${width} ${height}\n65535\n`, "ascii");
  const raster = Buffer.alloc(values.length * 2);
  values.forEach((v, i) => raster.writeUInt16BE(v, i * 2));
  return new Uint8Array(Buffer.concat([header, raster]));
}

describe("netpbm parsing", () => {
  it("parses 16-bit big-endian PGM", () => {
    const map = parsePgm16(pgmBytes(2, 2, [1, 2, 2, 1]));
    expect(map.width).toBe(2);
    expect(map.nRegions).toBe(2);
    expect(Array.from(map.values)).toEqual([1, 2, 2, 1]);
  });

  it("rejects wrong maxval and truncation", () => {
    const bad = Buffer.from("P5\n2 2\n255\n....", "ascii");
    expect(() => parsePgm16(new Uint8Array(bad))).toThrow(/maxval/);
    const whole = pgmBytes(2, 2, [1, 2, 2, 1]);
    expect(() => parsePgm16(whole.slice(0, whole.length - 3))).toThrow(/truncated/);
  });

  it("parses P6 PPM with comments", () => {
    const header = Buffer.from("P6\n# note\n2 1\n255\n", "ascii");
    const raster = Buffer.from([10, 20, 30, 40, 50, 60]);
    const image = parsePpm(new Uint8Array(Buffer.concat([header, raster])));
    expect(image.width).toBe(2);
    expect(image.height).toBe(1);
    expect(Array.from(image.pixels)).toEqual([10, 20, 30, 40, 50, 60]);
  });
});

describe("graph and manifest parsing", () => {
  const graphJson = JSON.stringify({
    version: 1,
    pair_id: "p7",
    anchor_image: "a.ppm",
    target_image: "t.ppm",
    label_map: "m.pgm",
    regions: [
      {
        index: 1,
        class: "sky",
        side: "A",
        distortion: { family: "noise", subtype: "gaussian" },
        severity: "severe",
        score: 0.25,
      },
      {
        index: 1,
        class: "sky",
        side: "T",
        distortion: { family: "clean", subtype: "none" },
        severity: "none",
        score: 1.0,
      },
    ],
    distortion_edges: [{ index: 1, relation: "significantly_worse" }],
  });

  it("extracts per-region truth", () => {
    const truth = parseGraph(graphJson);
    expect(truth.nRegions).toBe(1);
    expect(truth.familyA[0]).toBe(FAMILIES.indexOf("noise"));
    expect(truth.familyT[0]).toBe(FAMILIES.indexOf("clean"));
    expect(truth.severityA[0]).toBe(SEVERITIES.indexOf("severe"));
    expect(truth.relation[0]).toBe(RELATIONS.indexOf("significantly_worse"));
    expect(truth.scoreT[0]).toBe(1.0);
  });

  it("rejects unknown enums and versions", () => {
    expect(() => parseGraph(graphJson.replace("noise", "mud"))).toThrow(/family/);
    expect(() => parseGraph(graphJson.replace('"version":1', '"version":9'))).toThrow(
      /version/
    );
  });

  it("parses manifests", () => {
    const manifest = parseManifest(
      JSON.stringify({
        version: 1,
        toolkit_version: "0.1.0",
        split: "hard",
        global_seed: 9,
        pairs: [
          {
            pair_id: "hard-00000",
            scene_id: "scene0001",
            setting_anchor: "mixed",
            setting_target: "mixed",
            seed: 123,
            graph: "graphs/hard-00000.json",
            anchor_image: "images/hard-00000_A.ppm",
            target_image: "images/hard-00000_T.ppm",
            label_map: "maps/scene0001.pgm",
          },
        ],
      })
    );
    expect(manifest.split).toBe("hard");
    expect(manifest.pairs[0].graph).toBe("graphs/hard-00000.json");
  });
});

describe("prediction CSV", () => {
  it("writes the exact header and enum spellings", () => {
    const text = writePredictionsCsv([
      {
        pairId: "p1",
        regionIndex: 2,
        relation: 1,
        familyA: 0,
        familyT: 14,
        severityA: 3,
        severityT: 0,
        scoreA: 0.5,
        scoreT: 1.0,
      },
      {
        pairId: "p1",
        regionIndex: 1,
        relation: 0,
        familyA: 7,
        familyT: 7,
        severityA: 1,
        severityT: 1,
        scoreA: 0.25,
        scoreT: 0.249999,
      },
    ]);
    const lines = text.trim().split("\n");
    expect(lines[0]).toBe(PREDICTION_HEADER);
    expect(lines[1]).toBe("p1,1,same,noise,noise,minor,minor,0.250000,0.249999");
    expect(lines[2]).toBe(
      "p1,2,slightly_better,blur,clean,severe,none,0.500000,1.000000"
    );
  });
});

describe("patch encoder", () => {
  it("is deterministic and maps identical images identically", async () => {
    const { PatchEncoder } = await import("../src/encoder.js");
    const image = {
      width: 8,
      height: 8,
      pixels: Uint8Array.from({ length: 8 * 8 * 3 }, (_, i) => (i * 37) % 256),
    };
    const a = new PatchEncoder(4, 6, 3);
    const b = new PatchEncoder(4, 6, 3);
    expect(a.gridSize(image)).toEqual({ gh: 2, gw: 2 });
    expect(Array.from(a.encode(image).data)).toEqual(Array.from(b.encode(image).data));
    const other = new PatchEncoder(4, 6, 4);
    expect(Array.from(other.encode(image).data)).not.toEqual(
      Array.from(a.encode(image).data)
    );
    expect(() => a.gridSize({ width: 10, height: 8 })).toThrow(/divisible/);
  });
});

describe("mask pooling", () => {
  it("max-pools region membership onto the feature grid", () => {
    // 4x4 map, patch 2 -> 2x2 grid; region 2 occupies one pixel bottom-right
    const labels = Uint16Array.from([
      1, 1, 1, 1,
      1, 1, 1, 1,
      1, 1, 1, 1,
      1, 1, 1, 2,
    ]);
    const masks = poolMasks(labels, 4, 4, 2, 2);
    expect(Array.from(masks[0])).toEqual([1, 1, 1, 1]);
    expect(Array.from(masks[1])).toEqual([0, 0, 0, 1]);
  });
});
