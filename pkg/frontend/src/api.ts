// Typed client for the service's /v1 endpoints. Query strings pass the form's
// raw values through untouched so what the UI sends is exactly what was typed.

export interface GridResponse {
  variable: string;
  date: string;
  lats: number[];
  lons: number[];
  values: Array<number | null>;
  mask: boolean[];
  lo: number;
  hi: number;
}

export interface RouteNode {
  id: number;
  lat: number;
  lon: number;
}

export interface RouteLeg {
  from: number;
  to: number;
  length_km: number;
  rain_mm: number;
  cost: number;
}

export interface RouteResponse {
  nodes: RouteNode[];
  legs: RouteLeg[];
  total_cost: number;
  total_length: number;
  depart: string;
}

export interface Recommendation {
  location: string;
  cf_score: number;
  comfort_score: number;
  blended_score: number;
  rank: number;
}

export interface RecommendationsResponse {
  user: string;
  lambda: number;
  date: string;
  recommendations: Recommendation[];
}

export interface ApiErrorBody {
  error: string;
  message: string;
}

export class ApiError extends Error {
  constructor(public status: number, public body: ApiErrorBody) {
    super(`${body.error}: ${body.message}`);
  }
}

export interface RouteFormValues {
  from_lat: string;
  from_lon: string;
  to_lat: string;
  to_lon: string;
  depart: string;
}

export function gridQuery(variable: string, date: string): string {
  const q = new URLSearchParams({ var: variable, date, format: "json" });
  return `/v1/grid?${q.toString()}`;
}

export function routeQuery(form: RouteFormValues): string {
  const q = new URLSearchParams({
    from_lat: form.from_lat,
    from_lon: form.from_lon,
    to_lat: form.to_lat,
    to_lon: form.to_lon,
    depart: form.depart,
  });
  return `/v1/route?${q.toString()}`;
}

export function recommendationsQuery(user: string, n: number, lambda: string,
                                     date: string): string {
  const q = new URLSearchParams({ user, n: String(n), lambda, date });
  return `/v1/recommendations?${q.toString()}`;
}

async function getJson<T>(base: string, path: string): Promise<T> {
  const response = await fetch(base + path);
  const body = await response.json();
  if (!response.ok) {
    throw new ApiError(response.status, body as ApiErrorBody);
  }
  return body as T;
}

export class Client {
  constructor(public base: string = "") {}

  grid(variable: string, date: string): Promise<GridResponse> {
    return getJson(this.base, gridQuery(variable, date));
  }

  route(form: RouteFormValues): Promise<RouteResponse> {
    return getJson(this.base, routeQuery(form));
  }

  recommendations(user: string, n: number, lambda: string,
                  date: string): Promise<RecommendationsResponse> {
    return getJson(this.base, recommendationsQuery(user, n, lambda, date));
  }

  async recordInteraction(user: string, location: string, weight: number): Promise<void> {
    const response = await fetch(this.base + "/v1/interactions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ user, location, weight }),
    });
    if (!response.ok) {
      throw new ApiError(response.status, await response.json());
    }
  }
}
