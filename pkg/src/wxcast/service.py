"""HTTP API: personalized forecasts, routes, recommendations, grids, clusters.

Every request is answered against exactly one store snapshot (its version is
echoed in the X-Snapshot-Version header). Ingestion happens only through the
replay provider, which publishes a new snapshot atomically; interaction-matrix
writes go through a single lock.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass, field
from datetime import date
from typing import Optional

import numpy as np
from fastapi import FastAPI, Query, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import cluster, forecast, recsys, render, router
from .errors import (
    EmptyStore,
    FixtureCorrupt,
    KTooLarge,
    NoData,
    NoQualifyingCells,
    NonPositiveWeight,
    NoRoute,
    UnknownLocation,
    UnknownUser,
    WxError,
)
from .ncgrid import GridDataset, classify_kind
from .recsys import InteractionMatrix
from .router import RoadGraph, WeatherWeights
from .store import KNOWN_KINDS, GeoPoint, Store, StoreSnapshot, UNIX_EPOCH

log = logging.getLogger("wxcast.service")


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        self.status = status
        self.code = code
        self.message = message


@dataclass
class ApiConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    snapshot_dir: str = "store"
    road_graph: Optional[str] = None
    matrix_path: Optional[str] = None
    router_weights: WeatherWeights = field(default_factory=WeatherWeights)
    recommend_k: int = 10
    recommend_blend: float = 0.3
    recommend_n: int = 5
    provider_mode: str = "off"  # off | replay
    provider_fixture_dir: Optional[str] = None
    provider_interval_s: float = 60.0
    cluster_seed: int = 42
    ui_dir: Optional[str] = None

    @classmethod
    def from_file(cls, path: str) -> "ApiConfig":
        with open(path) as f:
            doc = json.load(f)
        cfg = cls()
        listen = doc.get("listen", {})
        cfg.host = listen.get("host", cfg.host)
        cfg.port = int(listen.get("port", cfg.port))
        cfg.snapshot_dir = doc.get("snapshot_dir", cfg.snapshot_dir)
        cfg.road_graph = doc.get("road_graph")
        cfg.matrix_path = doc.get("matrix_path")
        if "router_weights" in doc:
            cfg.router_weights = WeatherWeights(**doc["router_weights"])
        rec = doc.get("recommend", {})
        cfg.recommend_k = int(rec.get("k", cfg.recommend_k))
        cfg.recommend_blend = float(rec.get("blend", cfg.recommend_blend))
        cfg.recommend_n = int(rec.get("n", cfg.recommend_n))
        prov = doc.get("provider", {})
        cfg.provider_mode = prov.get("mode", cfg.provider_mode)
        cfg.provider_fixture_dir = prov.get("fixture_dir")
        cfg.provider_interval_s = float(prov.get("interval_s", cfg.provider_interval_s))
        cfg.cluster_seed = int(doc.get("cluster_seed", cfg.cluster_seed))
        cfg.ui_dir = doc.get("ui_dir")
        cfg.apply_env()
        cfg.validate()
        return cfg

    def apply_env(self):
        listen = os.environ.get("WXCAST_LISTEN")
        if listen:
            host, _, port = listen.rpartition(":")
            self.host = host or self.host
            self.port = int(port)
        data_dir = os.environ.get("WXCAST_SNAPSHOT_DIR")
        if data_dir:
            self.snapshot_dir = data_dir

    def validate(self):
        if not 0 < self.port < 65536:
            raise ValueError(f"port {self.port} out of range")
        for label, path in (("road_graph", self.road_graph),
                            ("matrix_path", self.matrix_path),
                            ("provider fixture dir", self.provider_fixture_dir),
                            ("ui_dir", self.ui_dir)):
            if path is not None and not os.path.exists(path):
                raise FileNotFoundError(f"{label} does not exist: {path}")
        if self.provider_mode not in ("off", "replay"):
            raise ValueError(f"unknown provider mode {self.provider_mode!r}")
        if self.provider_mode == "replay" and not self.provider_fixture_dir:
            raise ValueError("replay mode needs provider.fixture_dir")


class ReplayProvider:
    """Feeds ProviderBatch fixture files into the store, one file per poll,
    in lexicographic order. Corrupt fixtures are skipped, never fatal."""

    def __init__(self, fixture_dir: str):
        self.fixture_dir = fixture_dir
        self.consumed = set()

    def pending(self):
        names = sorted(n for n in os.listdir(self.fixture_dir) if n.endswith(".json"))
        return [n for n in names if n not in self.consumed]

    def poll(self, store: Store) -> Optional[int]:
        """Ingest the next fixture; returns the new snapshot version, or None
        when exhausted or the next file was skipped."""
        for name in self.pending():
            self.consumed.add(name)
            path = os.path.join(self.fixture_dir, name)
            try:
                batch = _load_batch(path)
                ds = _batch_to_dataset(batch, store.current(), source=name)
            except (WxError, ValueError, KeyError, json.JSONDecodeError) as e:
                log.warning("skipping corrupt fixture %s: %s", name, e)
                return None
            snapshot = store.current().ingest(ds, source=name)
            store.publish(snapshot)
            log.info("provider ingested %s -> snapshot v%d", name, snapshot.version)
            return snapshot.version
        return None


def _load_batch(path: str) -> dict:
    with open(path) as f:
        doc = json.load(f)
    if not isinstance(doc.get("observations"), list) or not doc["observations"]:
        raise FixtureCorrupt("batch has no observations list")
    return doc


def _batch_to_dataset(batch: dict, snapshot: StoreSnapshot, source: str) -> GridDataset:
    """Scatter point observations onto the snapshot grid as a sparse dataset."""
    if snapshot.is_empty:
        raise FixtureCorrupt("cannot place observations: store has no grid yet")
    today = date.today()
    obs = []
    for rec in batch["observations"]:
        day = (date.fromisoformat(rec["date"]) - UNIX_EPOCH).days
        if day > (today - UNIX_EPOCH).days:
            raise FixtureCorrupt(f"observation date {rec['date']} is in the future")
        value = float(rec["value"])
        if not np.isfinite(value):
            raise FixtureCorrupt(f"non-finite value {rec['value']!r}")
        kind = classify_kind(rec["variable"])
        if "cell" in rec:
            li, lo = int(rec["cell"]["lat_idx"]), int(rec["cell"]["lon_idx"])
        else:
            li, lo = snapshot.nearest_cell(GeoPoint(float(rec["lat"]), float(rec["lon"])))
        obs.append((kind, day, li, lo, value))

    days = sorted({day for _, day, _, _, _ in obs})
    day_idx = {d: i for i, d in enumerate(days)}
    shape = (len(days), len(snapshot.lats), len(snapshot.lons))
    fields, masks, kinds = {}, {}, {}
    for kind, day, li, lo, value in obs:
        if kind not in fields:
            fields[kind] = np.zeros(shape)
            masks[kind] = np.ones(shape, dtype=bool)
            kinds[kind] = kind
        fields[kind][day_idx[day], li, lo] = value
        masks[kind][day_idx[day], li, lo] = False
    return GridDataset(lats=snapshot.lats.copy(), lons=snapshot.lons.copy(),
                       times=np.array(days, dtype=np.float64), epoch=UNIX_EPOCH,
                       fields=fields, fill_mask=masks, kinds=kinds, source=source)


class ServiceState:
    def __init__(self, config: ApiConfig):
        self.config = config
        self.store = Store(config.snapshot_dir)
        self.graph: Optional[RoadGraph] = None
        if config.road_graph:
            with open(config.road_graph) as f:
                self.graph = router.load_geojson(f.read())
        if config.matrix_path and os.path.getsize(config.matrix_path) > 0:
            with open(config.matrix_path) as f:
                self.matrix = InteractionMatrix.from_jsonl(f.read())
        else:
            self.matrix = InteractionMatrix()
        self._matrix_lock = threading.Lock()
        self._cluster_lock = threading.Lock()
        self._cluster_cache = {}
        self.provider = (ReplayProvider(config.provider_fixture_dir)
                         if config.provider_mode == "replay" else None)
        self._stop = threading.Event()

    def poll_provider(self) -> Optional[int]:
        if self.provider is None:
            return None
        return self.provider.poll(self.store)

    def start_provider_loop(self):
        if self.provider is None:
            return None

        def loop():
            while not self._stop.wait(self.config.provider_interval_s):
                try:
                    self.poll_provider()
                except Exception:
                    log.exception("provider poll failed")

        t = threading.Thread(target=loop, name="wxcast-provider", daemon=True)
        t.start()
        return t

    def stop(self):
        self._stop.set()

    def record_interaction(self, user: str, location: str, weight: float):
        with self._matrix_lock:
            self.matrix = self.matrix.record_interaction(user, location, weight)
            if self.config.matrix_path:
                tmp = self.config.matrix_path + ".tmp"
                with open(tmp, "w") as f:
                    f.write(self.matrix.to_jsonl())
                os.replace(tmp, self.config.matrix_path)

    def cluster_model(self, snapshot: StoreSnapshot, k: int, seed: int) -> dict:
        key = (snapshot.version, k, seed)
        with self._cluster_lock:
            if key not in self._cluster_cache:
                features = cluster.build_features(snapshot)
                model = cluster.kmeans_fit(features, k, seed=seed)
                doc = model.to_dict()
                doc["excluded_cells"] = [[c.lat_idx, c.lon_idx]
                                         for c in features.excluded_cells]
                doc["dropped_columns"] = list(features.dropped_columns)
                self._cluster_cache[key] = doc
            return self._cluster_cache[key]


# --- parameter parsing helpers (manual, so error bodies stay uniform) ---

def _need(value, code, what):
    if value is None or value == "":
        raise ApiError(400, code, f"missing required parameter {what}")
    return value


def _parse_float(raw, code, what):
    try:
        return float(_need(raw, code, what))
    except (TypeError, ValueError):
        raise ApiError(400, code, f"cannot parse {what}={raw!r}")


def _parse_point(lat_raw, lon_raw, what="coordinates"):
    lat = _parse_float(lat_raw, "bad_coords", f"{what} latitude")
    lon = _parse_float(lon_raw, "bad_coords", f"{what} longitude")
    try:
        return GeoPoint(lat, lon)
    except ValueError as e:
        raise ApiError(400, "bad_coords", str(e))


def _parse_date(raw, what="date"):
    try:
        return date.fromisoformat(_need(raw, "bad_date", what))
    except ValueError:
        raise ApiError(400, "bad_date", f"cannot parse {what}={raw!r} (want ISO-8601)")


def _parse_var(raw):
    var = _need(raw, "bad_var", "var")
    if var not in KNOWN_KINDS:
        raise ApiError(400, "bad_var", f"unknown variable {var!r}; "
                                       f"known: {', '.join(KNOWN_KINDS)}")
    return var


def _parse_int(raw, code, what, default=None, minimum=None):
    if raw is None or raw == "":
        if default is not None:
            return default
        raise ApiError(400, code, f"missing required parameter {what}")
    try:
        value = int(raw)
    except (TypeError, ValueError):
        raise ApiError(400, code, f"cannot parse {what}={raw!r}")
    if minimum is not None and value < minimum:
        raise ApiError(400, code, f"{what} must be >= {minimum}")
    return value


def _nonempty(state) -> StoreSnapshot:
    snapshot = state.store.current()
    if snapshot.is_empty:
        raise ApiError(503, "store_empty", "no snapshot ingested yet")
    return snapshot


def create_app(config: ApiConfig) -> FastAPI:
    state = ServiceState(config)
    app = FastAPI(title="wxcast", docs_url=None, redoc_url=None)
    app.state.wx = state

    @app.exception_handler(ApiError)
    async def api_error_handler(request: Request, exc: ApiError):
        version = state.store.current().version
        return JSONResponse(status_code=exc.status,
                            content={"error": exc.code, "message": exc.message},
                            headers={"X-Snapshot-Version": str(version)})

    @app.middleware("http")
    async def version_header(request: Request, call_next):
        response = await call_next(request)
        response.headers.setdefault("X-Snapshot-Version",
                                    str(state.store.current().version))
        return response

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "snapshot_version": state.store.current().version}

    @app.get("/v1/forecast")
    def get_forecast(lat: Optional[str] = None, lon: Optional[str] = None,
                     date_: Optional[str] = Query(None, alias="date"),
                     var: Optional[str] = None):
        snapshot = _nonempty(state)
        point = _parse_point(lat, lon)
        target = _parse_date(date_)
        variable = _parse_var(var)
        try:
            report = forecast.forecast_at(snapshot, point, target, variable)
        except NoData as e:
            raise ApiError(404, "no_data", str(e))
        headers = {"X-Snapshot-Version": str(snapshot.version)}
        return JSONResponse(report.to_dict(), headers=headers)

    @app.get("/v1/route")
    def get_route(from_lat: Optional[str] = None, from_lon: Optional[str] = None,
                  to_lat: Optional[str] = None, to_lon: Optional[str] = None,
                  depart: Optional[str] = None):
        if state.graph is None:
            raise ApiError(503, "graph_missing", "no road graph configured")
        snapshot = state.store.current()
        weights = config.router_weights
        needs_weather = weights.rain_penalty > 0 or weights.snow_penalty > 0
        if needs_weather and snapshot.is_empty:
            raise ApiError(503, "store_empty", "routing weather needs a snapshot")
        origin = _parse_point(from_lat, from_lon, "origin")
        dest = _parse_point(to_lat, to_lon, "destination")
        depart_date = _parse_date(depart, "depart")
        try:
            result = router.best_path(state.graph, origin, dest, depart_date,
                                      snapshot, weights)
        except NoRoute as e:
            raise ApiError(404, "no_route", str(e))
        headers = {"X-Snapshot-Version": str(snapshot.version)}
        return JSONResponse(result.to_dict(state.graph), headers=headers)

    @app.get("/v1/recommendations")
    def get_recommendations(user: Optional[str] = None, n: Optional[str] = None,
                            lambda_: Optional[str] = Query(None, alias="lambda"),
                            date_: Optional[str] = Query(None, alias="date")):
        user = _need(user, "bad_user", "user")
        count = _parse_int(n, "bad_param", "n", default=config.recommend_n, minimum=1)
        if lambda_ is None or lambda_ == "":
            blend = config.recommend_blend
        else:
            blend = _parse_float(lambda_, "bad_param", "lambda")
            if not 0.0 <= blend <= 1.0:
                raise ApiError(400, "bad_param", "lambda must be in [0, 1]")
        target = _parse_date(date_) if date_ else date.today()
        snapshot = state.store.current()
        if blend > 0.0 and snapshot.is_empty:
            raise ApiError(503, "store_empty", "comfort blending needs a snapshot")
        matrix = state.matrix
        try:
            recs = recsys.recommend(matrix, user, count, blend=blend,
                                    snapshot=snapshot, target_date=target,
                                    k=config.recommend_k)
        except UnknownUser:
            raise ApiError(404, "unknown_user", f"user {user!r} has no interactions")
        headers = {"X-Snapshot-Version": str(snapshot.version)}
        return JSONResponse({"user": user, "lambda": blend, "date": target.isoformat(),
                             "recommendations": [r.to_dict() for r in recs]},
                            headers=headers)

    @app.post("/v1/interactions", status_code=204)
    async def post_interaction(request: Request):
        try:
            body = await request.json()
        except json.JSONDecodeError:
            raise ApiError(400, "bad_json", "request body is not valid JSON")
        if not isinstance(body, dict):
            raise ApiError(400, "bad_json", "request body must be a JSON object")
        user = body.get("user")
        location = body.get("location")
        weight = body.get("weight", 1.0)
        if not user or not isinstance(user, str):
            raise ApiError(400, "bad_user", "user must be a nonempty string")
        if not location or not isinstance(location, str):
            raise ApiError(400, "bad_location", "location must be a nonempty string")
        if not isinstance(weight, (int, float)) or isinstance(weight, bool):
            raise ApiError(400, "bad_weight", "weight must be a number")
        try:
            state.record_interaction(user, location, float(weight))
        except UnknownLocation:
            raise ApiError(404, "unknown_location", f"location {location!r} not registered")
        except NonPositiveWeight as e:
            raise ApiError(400, "bad_weight", str(e))
        return Response(status_code=204)

    @app.get("/v1/grid")
    def get_grid(var: Optional[str] = None,
                 date_: Optional[str] = Query(None, alias="date"),
                 format: Optional[str] = "json",
                 lo: Optional[str] = None, hi: Optional[str] = None,
                 palette: Optional[str] = None, scale: Optional[str] = None):
        snapshot = _nonempty(state)
        variable = _parse_var(var)
        target = _parse_date(date_)
        if format not in ("json", "ppm"):
            raise ApiError(400, "bad_param", f"format must be json or ppm, got {format!r}")

        values, mask = forecast.grid_forecast(snapshot, variable, target)
        if mask.all():
            raise ApiError(404, "no_data", f"no {variable} data anywhere in the grid")
        if lo is not None or hi is not None:
            lo_v = _parse_float(lo, "bad_param", "lo")
            hi_v = _parse_float(hi, "bad_param", "hi")
            if not lo_v < hi_v:
                raise ApiError(400, "bad_param", "lo must be < hi")
        else:
            lo_v, hi_v = render.field_range(values, mask)
        headers = {"X-Snapshot-Version": str(snapshot.version)}

        if format == "json":
            flat_vals = [None if m else float(v)
                         for v, m in zip(values.ravel(), mask.ravel())]
            return JSONResponse({
                "variable": variable, "date": target.isoformat(),
                "lats": snapshot.lats.tolist(), "lons": snapshot.lons.tolist(),
                "values": flat_vals, "mask": mask.ravel().astype(bool).tolist(),
                "lo": lo_v, "hi": hi_v,
            }, headers=headers)

        pal_name = palette or ("rain" if variable == "rainfall" else "thermal")
        if pal_name not in render.PALETTES:
            raise ApiError(400, "bad_param", f"unknown palette {pal_name!r}")
        scale_v = _parse_int(scale, "bad_param", "scale", default=1, minimum=1)
        lat_ascending = bool(len(snapshot.lats) < 2 or snapshot.lats[1] > snapshot.lats[0])
        img = render.render_field(values, mask, lo_v, hi_v,
                                  render.PALETTES[pal_name], scale=scale_v,
                                  lat_ascending=lat_ascending)
        headers["X-Range-Lo"] = repr(lo_v)
        headers["X-Range-Hi"] = repr(hi_v)
        return Response(content=render.encode_ppm(img),
                        media_type="image/x-portable-pixmap", headers=headers)

    @app.get("/v1/clusters")
    def get_clusters(k: Optional[str] = None, seed: Optional[str] = None):
        snapshot = _nonempty(state)
        k_v = _parse_int(k, "bad_param", "k", default=5, minimum=1)
        seed_v = _parse_int(seed, "bad_param", "seed", default=config.cluster_seed)
        try:
            doc = state.cluster_model(snapshot, k_v, seed_v)
        except KTooLarge as e:
            raise ApiError(400, "k_too_large", str(e))
        except NoQualifyingCells as e:
            raise ApiError(404, "no_qualifying_cells", str(e))
        headers = {"X-Snapshot-Version": str(snapshot.version)}
        return JSONResponse(doc, headers=headers)

    if config.ui_dir:
        app.mount("/ui", StaticFiles(directory=config.ui_dir, html=True), name="ui")

    return app


def serve_forever(config: ApiConfig):
    """Run uvicorn plus the provider polling loop (CLI entry point)."""
    import uvicorn

    app = create_app(config)
    state = app.state.wx
    state.start_provider_loop()
    try:
        uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    finally:
        state.stop()
