// DOM wiring. All computation lives in the pure modules; this file only moves
// values between inputs, fetches and the canvas.

import { ApiError, Client, RouteFormValues } from "./api.js";
import { cellAt, gridCells, legend } from "./grid.js";
import { cssColor, PALETTES } from "./palette.js";
import { recRows } from "./recs.js";
import { polylinePoints, routePanel, validateRouteForm } from "./route.js";
import { gates, initialState } from "./state.js";

const client = new Client("");
const state = initialState();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("grid-canvas");
const banner = el<HTMLDivElement>("banner");

function showBanner(message: string) {
  banner.textContent = message;
  banner.hidden = false;
}

function clearBanner() {
  banner.hidden = true;
}

function paletteFor(variable: string) {
  return variable === "rainfall" ? PALETTES.rain : PALETTES.thermal;
}

function redraw() {
  const ctx = canvas.getContext("2d");
  if (!ctx || !state.grid) return;
  const palette = paletteFor(state.grid.variable);
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  for (const cell of gridCells(state.grid, palette, canvas.width, canvas.height)) {
    ctx.fillStyle = cssColor(cell.color);
    ctx.fillRect(cell.x, cell.y, Math.ceil(cell.w), Math.ceil(cell.h));
  }
  if (state.route) {
    const pts = polylinePoints(state.route, state.grid, canvas.width, canvas.height);
    ctx.strokeStyle = "#111";
    ctx.lineWidth = 3;
    ctx.beginPath();
    pts.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
    ctx.stroke();
    ctx.fillStyle = "#111";
    for (const p of pts) {
      ctx.beginPath();
      ctx.arc(p.x, p.y, 4, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
  const lg = el<HTMLDivElement>("legend");
  lg.innerHTML = "";
  const lo = document.createElement("span");
  lo.textContent = String(state.grid.lo);
  lg.appendChild(lo);
  const bar = document.createElement("div");
  bar.className = "legend-bar";
  for (const color of legend(state.grid, palette)) {
    const chip = document.createElement("i");
    chip.style.background = color;
    bar.appendChild(chip);
  }
  lg.appendChild(bar);
  const hi = document.createElement("span");
  hi.textContent = String(state.grid.hi);
  lg.appendChild(hi);
}

async function loadGrid() {
  const variable = el<HTMLSelectElement>("grid-var").value;
  const date = el<HTMLInputElement>("grid-date").value;
  const token = gates.grid.begin();
  clearBanner();
  try {
    const grid = await client.grid(variable, date);
    if (!gates.grid.accept(token)) return;
    state.grid = grid;
    state.variable = variable;
    state.date = date;
    redraw();
  } catch (err) {
    if (!gates.grid.accept(token)) return;
    showBanner(err instanceof ApiError ? err.message : `grid request failed: ${err}`);
  }
}

function routeFormValues(): RouteFormValues {
  return {
    from_lat: el<HTMLInputElement>("from-lat").value,
    from_lon: el<HTMLInputElement>("from-lon").value,
    to_lat: el<HTMLInputElement>("to-lat").value,
    to_lon: el<HTMLInputElement>("to-lon").value,
    depart: el<HTMLInputElement>("depart").value,
  };
}

function markFieldErrors(errors: Record<string, string>) {
  for (const field of ["from_lat", "from_lon", "to_lat", "to_lon", "depart"]) {
    const input = el<HTMLInputElement>(field.replace("_", "-"));
    const message = errors[field];
    input.classList.toggle("invalid", Boolean(message));
    input.title = message || "";
  }
}

async function submitRoute() {
  const form = routeFormValues();
  const errors = validateRouteForm(form);
  markFieldErrors(errors);
  const inline = el<HTMLDivElement>("route-error");
  inline.textContent = "";
  if (Object.keys(errors).length > 0) return; // no request on invalid input
  const token = gates.route.begin();
  try {
    const route = await client.route(form);
    if (!gates.route.accept(token)) return;
    state.route = route;
    const panel = routePanel(route);
    el<HTMLSpanElement>("route-cost").textContent = panel.totalCost;
    el<HTMLSpanElement>("route-length").textContent = panel.totalLength;
    const legs = el<HTMLTableSectionElement>("route-legs");
    legs.innerHTML = "";
    for (const leg of panel.legs) {
      const tr = document.createElement("tr");
      for (const cell of [leg.label, leg.length, leg.rain, leg.cost]) {
        const td = document.createElement("td");
        td.textContent = cell;
        tr.appendChild(td);
      }
      legs.appendChild(tr);
    }
    redraw();
  } catch (err) {
    if (!gates.route.accept(token)) return;
    if (err instanceof ApiError && err.status === 404) {
      inline.textContent = "no route between those points";
    } else if (err instanceof ApiError && err.status === 400) {
      inline.textContent = err.body.message;
    } else {
      showBanner(`route request failed: ${err}`);
    }
  }
}

async function loadRecommendations() {
  const user = el<HTMLInputElement>("rec-user").value.trim();
  const lambda = el<HTMLInputElement>("rec-lambda").value;
  el<HTMLSpanElement>("rec-lambda-value").textContent = lambda;
  const inline = el<HTMLDivElement>("rec-error");
  inline.textContent = "";
  if (!user) return;
  state.user = user;
  const token = gates.recommendations.begin();
  try {
    const response = await client.recommendations(
      user, 10, lambda, el<HTMLInputElement>("grid-date").value);
    if (!gates.recommendations.accept(token)) return;
    state.recommendations = response;
    const body = el<HTMLTableSectionElement>("rec-rows");
    body.innerHTML = "";
    for (const row of recRows(response)) {
      const tr = document.createElement("tr");
      for (const cell of [row.rank, row.location, row.blended, row.cf, row.comfort]) {
        const td = document.createElement("td");
        td.textContent = cell;
        tr.appendChild(td);
      }
      body.appendChild(tr);
    }
  } catch (err) {
    if (!gates.recommendations.accept(token)) return;
    if (err instanceof ApiError && err.status === 404) {
      inline.textContent = `unknown user "${user}" — record a first visit:`;
      el<HTMLDivElement>("rec-first-visit").hidden = false;
    } else {
      showBanner(`recommendations request failed: ${err}`);
    }
  }
}

async function recordFirstVisit() {
  const user = el<HTMLInputElement>("rec-user").value.trim();
  const location = el<HTMLInputElement>("first-visit-location").value.trim();
  if (!user || !location) return;
  try {
    await client.recordInteraction(user, location, 1.0);
    el<HTMLDivElement>("rec-first-visit").hidden = true;
    await loadRecommendations();
  } catch (err) {
    el<HTMLDivElement>("rec-error").textContent =
      err instanceof ApiError ? err.message : String(err);
  }
}

// click on the grid fills the focused coordinate pair with the cell center
let focusedCoordPair: "from" | "to" = "from";
for (const prefix of ["from", "to"] as const) {
  for (const axis of ["lat", "lon"]) {
    el<HTMLInputElement>(`${prefix}-${axis}`).addEventListener(
      "focus", () => (focusedCoordPair = prefix));
  }
}

canvas.addEventListener("click", (event) => {
  if (!state.grid) return;
  const rect = canvas.getBoundingClientRect();
  const hit = cellAt(state.grid, rect.width, rect.height,
                     event.clientX - rect.left, event.clientY - rect.top);
  if (!hit) return;
  el<HTMLInputElement>(`${focusedCoordPair}-lat`).value = String(hit.lat);
  el<HTMLInputElement>(`${focusedCoordPair}-lon`).value = String(hit.lon);
});

el<HTMLButtonElement>("grid-load").addEventListener("click", loadGrid);
el<HTMLFormElement>("route-form").addEventListener("submit", (e) => {
  e.preventDefault();
  submitRoute();
});
el<HTMLInputElement>("depart").addEventListener("change", () => {
  // what-if loop: changing the departure date re-queries the same route
  if (state.route) submitRoute();
});
el<HTMLButtonElement>("rec-load").addEventListener("click", loadRecommendations);
el<HTMLInputElement>("rec-lambda").addEventListener("change", loadRecommendations);
el<HTMLButtonElement>("first-visit-go").addEventListener("click", recordFirstVisit);

loadGrid();
