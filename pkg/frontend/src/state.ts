// Single mutable view state; per-widget sequence gates keep stale responses out.

import { GridResponse, RecommendationsResponse, RouteResponse } from "./api.js";
import { SequenceGate } from "./seq.js";

export interface ViewState {
  variable: string;
  date: string;
  grid: GridResponse | null;
  route: RouteResponse | null;
  recommendations: RecommendationsResponse | null;
  user: string;
}

export function initialState(): ViewState {
  return {
    variable: "temperature",
    date: new Date().toISOString().slice(0, 10),
    grid: null,
    route: null,
    recommendations: null,
    user: "",
  };
}

export const gates = {
  grid: new SequenceGate(),
  route: new SequenceGate(),
  recommendations: new SequenceGate(),
};
