// The client's palette math must match the server renderer on shared vectors.

import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { colorOf, PALETTES } from "../src/palette.js";

interface VectorFile {
  missing_color: number[];
  palettes: Record<string, { stops: Array<[number, number[]]> }>;
  vectors: Array<{ palette: string; value: number; lo: number; hi: number;
                   rgb: number[] }>;
}

const doc: VectorFile = JSON.parse(readFileSync(
  fileURLToPath(new URL("./fixtures/palette_vectors.json", import.meta.url)),
  "utf-8"));

describe("shared palette vectors", () => {
  it("palette definitions mirror the server's", () => {
    for (const [name, entry] of Object.entries(doc.palettes)) {
      const local = PALETTES[name];
      expect(local, `palette ${name}`).toBeDefined();
      expect(local.stops.map(([a, c]) => [a, [...c]])).toEqual(entry.stops);
      expect([...local.missingColor]).toEqual(doc.missing_color);
    }
  });

  it("every vector matches exactly", () => {
    expect(doc.vectors.length).toBeGreaterThanOrEqual(100);
    for (const vec of doc.vectors) {
      const got = colorOf(vec.value, vec.lo, vec.hi, PALETTES[vec.palette]);
      expect([...got], JSON.stringify(vec)).toEqual(vec.rgb);
    }
  });

  it("endpoint and midpoint arithmetic", () => {
    expect(colorOf(0, 0, 1, PALETTES.grayscale)).toEqual([0, 0, 0]);
    expect(colorOf(1, 0, 1, PALETTES.grayscale)).toEqual([255, 255, 255]);
    // 0.5 * 255 = 127.5 rounds half-up to 128, matching the server
    expect(colorOf(0.5, 0, 1, PALETTES.grayscale)).toEqual([128, 128, 128]);
  });
});
