// Recommendation panel rows: response fields straight through as strings.

import { RecommendationsResponse } from "./api.js";

export interface RecRow {
  rank: string;
  location: string;
  blended: string;
  cf: string;
  comfort: string;
}

export function recRows(response: RecommendationsResponse): RecRow[] {
  return response.recommendations.map((r) => ({
    rank: String(r.rank),
    location: r.location,
    blended: String(r.blended_score),
    cf: String(r.cf_score),
    comfort: String(r.comfort_score),
  }));
}
