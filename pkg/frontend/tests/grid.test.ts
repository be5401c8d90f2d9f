// Grid drawing math against a mock service response.

import { describe, expect, it } from "vitest";
import { GridResponse } from "../src/api.js";
import { cellAt, gridCells, latRowOrder } from "../src/grid.js";
import { colorOf, PALETTES } from "../src/palette.js";

const grid2x3: GridResponse = {
  variable: "temperature",
  date: "2026-08-15",
  lats: [0.0, 10.0],
  lons: [0.0, 5.0, 10.0],
  values: [1.0, 2.0, 3.0, 4.0, null, 6.0],
  mask: [false, false, false, false, true, false],
  lo: 1.0,
  hi: 6.0,
};

describe("gridCells", () => {
  it("draws one rect per cell", () => {
    const cells = gridCells(grid2x3, PALETTES.thermal, 600, 400);
    expect(cells).toHaveLength(6);
    expect(cells[0]).toMatchObject({ x: 0, y: 0, w: 200, h: 200 });
  });

  it("masked cell gets the missing color", () => {
    const cells = gridCells(grid2x3, PALETTES.thermal, 600, 400);
    const masked = cells.find((c) => c.latIdx === 1 && c.lonIdx === 1);
    expect(masked?.color).toEqual(PALETTES.thermal.missingColor);
  });

  it("value at hi maps to the last palette anchor, like the server", () => {
    const cells = gridCells(grid2x3, PALETTES.thermal, 600, 400);
    const hot = cells.find((c) => c.latIdx === 1 && c.lonIdx === 2);
    expect(hot?.color).toEqual([255, 0, 0]);
    expect(hot?.color).toEqual(
      colorOf(grid2x3.hi, grid2x3.lo, grid2x3.hi, PALETTES.thermal));
  });

  it("north at top: higher latitude row renders first", () => {
    expect(latRowOrder(grid2x3.lats)).toEqual([1, 0]);
    const cells = gridCells(grid2x3, PALETTES.thermal, 600, 400);
    expect(cells[0].latIdx).toBe(1);
    // descending axes need no flip
    expect(latRowOrder([50.0, 40.0])).toEqual([0, 1]);
  });
});

describe("cellAt", () => {
  it("maps clicks back to cell-center coordinates", () => {
    expect(cellAt(grid2x3, 600, 400, 10, 10)).toEqual({ lat: 10.0, lon: 0.0 });
    expect(cellAt(grid2x3, 600, 400, 599, 399)).toEqual({ lat: 0.0, lon: 10.0 });
    expect(cellAt(grid2x3, 600, 400, 300, 300)).toEqual({ lat: 0.0, lon: 5.0 });
    expect(cellAt(grid2x3, 600, 400, -5, 10)).toBeNull();
  });
});
