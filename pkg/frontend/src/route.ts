// Route form validation, polyline projection and the cost panel contents.
// Panel numbers are the service's response fields verbatim, never recomputed.

import { GridResponse, RouteFormValues, RouteResponse } from "./api.js";

export interface FieldErrors {
  [field: string]: string;
}

const DATE_RE = /^\d{4}-\d{2}-\d{2}$/;

export function validateRouteForm(form: RouteFormValues): FieldErrors {
  const errors: FieldErrors = {};
  const coords: Array<[keyof RouteFormValues, number, number]> = [
    ["from_lat", -90, 90], ["to_lat", -90, 90],
    ["from_lon", -180, 180], ["to_lon", -180, 180],
  ];
  for (const [field, lo, hi] of coords) {
    const raw = form[field].trim();
    const value = Number(raw);
    if (raw === "" || !Number.isFinite(value)) {
      errors[field] = "enter a number";
    } else if (value < lo || value > hi) {
      errors[field] = `must be in [${lo}, ${hi}]`;
    }
  }
  if (!DATE_RE.test(form.depart.trim())) {
    errors.depart = "use YYYY-MM-DD";
  }
  return errors;
}

export interface Point {
  x: number;
  y: number;
}

// project route nodes into canvas space using the grid's coordinate extent
export function polylinePoints(route: RouteResponse, grid: GridResponse,
                               width: number, height: number): Point[] {
  const lats = grid.lats;
  const lons = grid.lons;
  const latMin = Math.min(lats[0], lats[lats.length - 1]);
  const latMax = Math.max(lats[0], lats[lats.length - 1]);
  const lonMin = Math.min(lons[0], lons[lons.length - 1]);
  const lonMax = Math.max(lons[0], lons[lons.length - 1]);
  const latSpan = latMax - latMin || 1;
  const lonSpan = lonMax - lonMin || 1;
  return route.nodes.map((n) => ({
    x: ((n.lon - lonMin) / lonSpan) * width,
    y: (1 - (n.lat - latMin) / latSpan) * height, // north at top
  }));
}

export interface RoutePanel {
  totalCost: string;
  totalLength: string;
  depart: string;
  legs: Array<{ label: string; length: string; rain: string; cost: string }>;
}

export function routePanel(route: RouteResponse): RoutePanel {
  return {
    totalCost: String(route.total_cost),
    totalLength: String(route.total_length),
    depart: route.depart,
    legs: route.legs.map((leg) => ({
      label: `${leg.from} → ${leg.to}`,
      length: String(leg.length_km),
      rain: String(leg.rain_mm),
      cost: String(leg.cost),
    })),
  };
}
