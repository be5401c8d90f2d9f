// Pure grid-drawing math: cell rectangles, colors and legend values computed
// from the service's grid JSON; the canvas glue in main.ts just fills rects.

import { GridResponse } from "./api.js";
import { colorOf, cssColor, Palette, Rgb } from "./palette.js";

export interface CellRect {
  x: number;
  y: number;
  w: number;
  h: number;
  color: Rgb;
  latIdx: number;
  lonIdx: number;
}

// north at top: highest latitude row first, mirroring the server's rasters
export function latRowOrder(lats: number[]): number[] {
  const order = lats.map((_, i) => i);
  const ascending = lats.length < 2 || lats[1] > lats[0];
  return ascending ? order.reverse() : order;
}

export function gridCells(grid: GridResponse, palette: Palette,
                          width: number, height: number): CellRect[] {
  const nLat = grid.lats.length;
  const nLon = grid.lons.length;
  const cellW = width / nLon;
  const cellH = height / nLat;
  const cells: CellRect[] = [];
  const rows = latRowOrder(grid.lats);
  rows.forEach((latIdx, row) => {
    for (let lonIdx = 0; lonIdx < nLon; lonIdx++) {
      const flat = latIdx * nLon + lonIdx;
      const value = grid.values[flat];
      const color = grid.mask[flat] || value === null
        ? palette.missingColor
        : colorOf(value, grid.lo, grid.hi, palette);
      cells.push({
        x: lonIdx * cellW,
        y: row * cellH,
        w: cellW,
        h: cellH,
        color,
        latIdx,
        lonIdx,
      });
    }
  });
  return cells;
}

// canvas position -> the cell under it, for click-to-fill coordinates
export function cellAt(grid: GridResponse, width: number, height: number,
                       x: number, y: number): { lat: number; lon: number } | null {
  const nLat = grid.lats.length;
  const nLon = grid.lons.length;
  const col = Math.floor((x / width) * nLon);
  const row = Math.floor((y / height) * nLat);
  if (col < 0 || col >= nLon || row < 0 || row >= nLat) {
    return null;
  }
  const latIdx = latRowOrder(grid.lats)[row];
  return { lat: grid.lats[latIdx], lon: grid.lons[col] };
}

export function legend(grid: GridResponse, palette: Palette, steps = 64): string[] {
  const colors: string[] = [];
  for (let i = 0; i < steps; i++) {
    const v = grid.lo + ((grid.hi - grid.lo) * i) / (steps - 1);
    colors.push(cssColor(colorOf(v, grid.lo, grid.hi, palette)));
  }
  return colors;
}
