"""HTTP contract tests: every endpoint's success and error paths, concurrency,
provider replay, and side-effect-freeness of GETs."""

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from datetime import date, timedelta

import pytest
from fastapi.testclient import TestClient

from wxcast import render
from wxcast.recsys import InteractionMatrix
from wxcast.service import ApiConfig, create_app
from wxcast.store import GeoPoint, Store, StoreSnapshot, to_epoch_day

DEPART = date(2021, 6, 15)
LAST_OBS = DEPART - timedelta(days=1)

GRAPH_GEOJSON = {
    "type": "FeatureCollection",
    "features": [
        {"type": "Feature", "properties": {"length_km": 5.0},
         "geometry": {"type": "LineString",
                      "coordinates": [[0.0, 0.0], [0.05, 0.1]]}},
        {"type": "Feature", "properties": {"length_km": 5.0},
         "geometry": {"type": "LineString",
                      "coordinates": [[0.05, 0.1], [0.1, 0.0]]}},
        {"type": "Feature", "properties": {"length_km": 6.0},
         "geometry": {"type": "LineString",
                      "coordinates": [[0.0, 0.0], [0.05, -0.1]]}},
        {"type": "Feature", "properties": {"length_km": 6.0},
         "geometry": {"type": "LineString",
                      "coordinates": [[0.05, -0.1], [0.1, 0.0]]}},
        {"type": "Feature", "properties": {},
         "geometry": {"type": "LineString",
                      "coordinates": [[30.0, 30.0], [30.1, 30.0]]}},
    ],
}


def build_fixture_snapshot():
    """2x2 grid: wet/hot north row (lat 0.1), dry/mild south row (lat -0.1).

    Cell (0, 0) also carries a July temperature series 2000-2010 that is
    exactly linear, 10 + 0.02 * (year - 2000), for trend queries.
    """
    rows_t = ["time,lat,lon,temp"]
    rows_r = ["time,lat,lon,rain"]
    for i in range(30):
        day = to_epoch_day(LAST_OBS) - 29 + i
        for lat, temp, rain in ((-0.1, 21.0, 0.0), (0.1, 35.0, 10.0)):
            for lon in (0.0, 0.1):
                rows_t.append(f"{day},{lat},{lon},{temp!r}")
                rows_r.append(f"{day},{lat},{lon},{rain!r}")
    for year in range(2000, 2011):
        day = to_epoch_day(date(year, 7, 15))
        rows_t.append(f"{day},-0.1,0.0,{10.0 + 0.02 * (year - 2000)!r}")
    snap = StoreSnapshot.empty().ingest("\n".join(rows_t) + "\n", source="fixture-temp")
    return snap.ingest("\n".join(rows_r) + "\n", source="fixture-rain")


def build_matrix():
    m = InteractionMatrix()
    for loc, lat, lon in (("home", -0.1, 0.0), ("hill", -0.1, 0.1),
                          ("lake", 0.1, 0.0), ("beach", 0.1, 0.1)):
        m = m.with_location(loc, GeoPoint(lat, lon))
    m = m.record_interaction("ada", "home", 2.0)
    m = m.record_interaction("ada", "hill", 1.0)
    m = m.record_interaction("bob", "home", 2.0)
    m = m.record_interaction("bob", "hill", 1.0)
    m = m.record_interaction("bob", "lake", 5.0)
    m = m.record_interaction("cyn", "beach", 1.0)
    return m


def write_fixture_env(tmp_path, provider_files=()):
    store_dir = tmp_path / "store"
    Store(store_dir).publish(build_fixture_snapshot())
    graph_path = tmp_path / "roads.geojson"
    graph_path.write_text(json.dumps(GRAPH_GEOJSON))
    matrix_path = tmp_path / "matrix.jsonl"
    matrix_path.write_text(build_matrix().to_jsonl())
    fixture_dir = tmp_path / "provider"
    fixture_dir.mkdir()
    for name, content in provider_files:
        (fixture_dir / name).write_text(content)
    return ApiConfig(
        snapshot_dir=str(store_dir),
        road_graph=str(graph_path),
        matrix_path=str(matrix_path),
        provider_mode="replay",
        provider_fixture_dir=str(fixture_dir),
        recommend_blend=0.3,
    )


@pytest.fixture
def env(tmp_path):
    config = write_fixture_env(tmp_path)
    app = create_app(config)
    with TestClient(app) as client:
        yield client, app, config


# --- healthz ---

def test_healthz(env):
    client, app, _ = env
    r = client.get("/healthz")
    assert r.status_code == 200
    assert r.json() == {"status": "ok", "snapshot_version": 2}
    assert r.headers["X-Snapshot-Version"] == "2"


# --- /v1/forecast ---

def test_forecast_persistence(env):
    client, _, _ = env
    r = client.get("/v1/forecast", params={
        "lat": "-0.1", "lon": "0.0", "date": DEPART.isoformat(), "var": "temperature"})
    assert r.status_code == 200
    body = r.json()
    assert body["method"] == "persistence"
    assert body["value"] == 21.0
    assert body["cell"] == {"lat": -0.1, "lon": 0.0, "lat_idx": 0, "lon_idx": 0}
    assert body["basis"]["last_observation"] == LAST_OBS.isoformat()


def test_forecast_trend_2100(env):
    client, _, _ = env
    r = client.get("/v1/forecast", params={
        "lat": "-0.1", "lon": "0.0", "date": "2100-07-15", "var": "temperature"})
    assert r.status_code == 200
    body = r.json()
    assert body["method"] == "trend"
    assert abs(body["value"] - 12.0) < 1e-3  # float32 store precision, amplified


def test_forecast_bad_inputs(env):
    client, _, _ = env
    r = client.get("/v1/forecast", params={
        "lat": "91", "lon": "0", "date": "2021-06-15", "var": "temperature"})
    assert r.status_code == 400
    assert r.json()["error"] == "bad_coords"
    r = client.get("/v1/forecast", params={
        "lat": "0", "lon": "0", "date": "junk", "var": "temperature"})
    assert r.status_code == 400
    assert r.json()["error"] == "bad_date"
    r = client.get("/v1/forecast", params={
        "lat": "0", "lon": "0", "date": "2021-06-15", "var": "wind"})
    assert r.status_code == 400
    assert r.json()["error"] == "bad_var"


def test_forecast_no_data_404(env):
    client, _, _ = env
    r = client.get("/v1/forecast", params={
        "lat": "0", "lon": "0", "date": "2021-06-15", "var": "pressure"})
    assert r.status_code == 404
    assert r.json()["error"] == "no_data"


# --- /v1/route ---

def test_route_diamond_picks_dry_arm(env):
    client, _, _ = env
    r = client.get("/v1/route", params={
        "from_lat": "0.0", "from_lon": "0.0", "to_lat": "0.0", "to_lon": "0.1",
        "depart": DEPART.isoformat()})
    assert r.status_code == 200
    body = r.json()
    lats = [n["lat"] for n in body["nodes"]]
    assert lats == [0.0, -0.1, 0.0]  # southern, dry waypoint
    assert body["total_cost"] == pytest.approx(12.0, rel=1e-6)
    assert body["total_length"] == pytest.approx(12.0, rel=1e-6)
    assert all(leg["rain_mm"] == 0.0 for leg in body["legs"])


def test_route_no_route(env):
    client, _, _ = env
    r = client.get("/v1/route", params={
        "from_lat": "0.0", "from_lon": "0.0", "to_lat": "30.0", "to_lon": "30.0",
        "depart": DEPART.isoformat()})
    assert r.status_code == 404
    assert r.json()["error"] == "no_route"


def test_route_missing_depart(env):
    client, _, _ = env
    r = client.get("/v1/route", params={
        "from_lat": "0.0", "from_lon": "0.0", "to_lat": "0.0", "to_lon": "0.1"})
    assert r.status_code == 400


def test_route_without_graph(tmp_path):
    config = write_fixture_env(tmp_path)
    config.road_graph = None
    app = create_app(config)
    with TestClient(app) as client:
        r = client.get("/v1/route", params={
            "from_lat": "0", "from_lon": "0", "to_lat": "0", "to_lon": "0.1",
            "depart": "2021-06-15"})
        assert r.status_code == 503
        assert r.json()["error"] == "graph_missing"


# --- /v1/recommendations + /v1/interactions ---

def test_twin_user_recommendation(env):
    client, _, _ = env
    r = client.get("/v1/recommendations", params={
        "user": "ada", "n": "4", "lambda": "0", "date": DEPART.isoformat()})
    assert r.status_code == 200
    recs = r.json()["recommendations"]
    assert recs[0]["location"] == "lake"  # the one place only the twin visited
    assert recs[0]["rank"] == 1
    assert {"cf_score", "comfort_score", "blended_score"} <= recs[0].keys()


def test_unknown_user_404(env):
    client, _, _ = env
    r = client.get("/v1/recommendations", params={"user": "ghost"})
    assert r.status_code == 404
    assert r.json()["error"] == "unknown_user"


def test_lambda_one_ranks_by_comfort(env):
    client, _, _ = env
    r = client.get("/v1/recommendations", params={
        "user": "cyn", "n": "4", "lambda": "1", "date": DEPART.isoformat()})
    assert r.status_code == 200
    recs = r.json()["recommendations"]
    comforts = [x["comfort_score"] for x in recs]
    assert comforts == sorted(comforts, reverse=True)
    assert recs[0]["location"] in ("home", "hill")  # dry 21 C side
    assert recs[0]["comfort_score"] == 1.0
    assert recs[0]["blended_score"] == recs[0]["comfort_score"]


def test_post_interaction_then_visible(env):
    client, app, config = env
    r = client.post("/v1/interactions",
                    json={"user": "newbie", "location": "beach", "weight": 2.0})
    assert r.status_code == 204
    r = client.get("/v1/recommendations", params={
        "user": "newbie", "n": "3", "lambda": "0", "date": DEPART.isoformat()})
    assert r.status_code == 200
    got = [x["location"] for x in r.json()["recommendations"]]
    assert "beach" not in got  # never re-recommend a visited location
    # persisted through the single-writer path
    text = open(config.matrix_path).read()
    assert "newbie" in text


def test_post_interaction_errors(env):
    client, _, _ = env
    r = client.post("/v1/interactions",
                    json={"user": "x", "location": "nowhere", "weight": 1})
    assert r.status_code == 404
    assert r.json()["error"] == "unknown_location"
    r = client.post("/v1/interactions",
                    json={"user": "x", "location": "home", "weight": 0})
    assert r.status_code == 400
    r = client.post("/v1/interactions", content=b"not json",
                    headers={"Content-Type": "application/json"})
    assert r.status_code == 400


# --- /v1/grid ---

def test_grid_json_shape(env):
    client, _, _ = env
    r = client.get("/v1/grid", params={
        "var": "temperature", "date": DEPART.isoformat(), "format": "json"})
    assert r.status_code == 200
    body = r.json()
    assert len(body["values"]) == len(body["lats"]) * len(body["lons"])
    assert len(body["mask"]) == len(body["values"])
    assert body["lo"] <= min(v for v in body["values"] if v is not None)
    assert body["hi"] >= max(v for v in body["values"] if v is not None)


def test_grid_ppm_matches_render_module(env):
    client, app, _ = env
    r = client.get("/v1/grid", params={
        "var": "temperature", "date": DEPART.isoformat(), "format": "ppm",
        "lo": "0", "hi": "40", "scale": "2"})
    assert r.status_code == 200
    assert r.headers["content-type"].startswith("image/x-portable-pixmap")
    from wxcast.forecast import grid_forecast
    snapshot = app.state.wx.store.current()
    values, mask = grid_forecast(snapshot, "temperature", DEPART)
    img = render.render_field(values, mask, 0.0, 40.0, render.THERMAL, scale=2)
    assert r.content == render.encode_ppm(img)
    assert hashlib.sha256(r.content).hexdigest() == hashlib.sha256(
        render.encode_ppm(img)).hexdigest()


def test_grid_bad_format(env):
    client, _, _ = env
    r = client.get("/v1/grid", params={
        "var": "temperature", "date": "2021-06-15", "format": "bmp"})
    assert r.status_code == 400


# --- /v1/clusters ---

def test_clusters_deterministic_and_cached(env):
    client, _, _ = env
    r1 = client.get("/v1/clusters", params={"k": "2"})
    assert r1.status_code == 200
    doc = r1.json()
    assert doc["k"] == 2
    assert len(doc["assignments"]) == 4
    assert len(doc["cells"]) == 4
    r2 = client.get("/v1/clusters", params={"k": "2"})
    assert r2.content == r1.content


def test_clusters_k_too_large(env):
    client, _, _ = env
    r = client.get("/v1/clusters", params={"k": "50"})
    assert r.status_code == 400
    assert r.json()["error"] == "k_too_large"


# --- empty store behavior ---

def test_empty_store_503(tmp_path):
    config = ApiConfig(snapshot_dir=str(tmp_path / "empty-store"))
    app = create_app(config)
    with TestClient(app) as client:
        for path, params in (
            ("/v1/forecast", {"lat": "0", "lon": "0", "date": "2021-06-15",
                              "var": "temperature"}),
            ("/v1/grid", {"var": "temperature", "date": "2021-06-15"}),
            ("/v1/clusters", {"k": "2"}),
        ):
            r = client.get(path, params=params)
            assert r.status_code == 503, path
            assert r.json()["error"] == "store_empty"
        assert client.get("/healthz").json()["snapshot_version"] == 0


# --- provider replay ---

def make_batch(day_iso, temp):
    return json.dumps({
        "source": "replay-test",
        "observations": [
            {"lat": -0.1, "lon": 0.0, "variable": "temperature",
             "date": day_iso, "value": temp},
            {"cell": {"lat_idx": 1, "lon_idx": 1}, "variable": "rainfall",
             "date": day_iso, "value": 4.0},
        ],
    })


def test_provider_replay_versions_and_data(tmp_path):
    files = [
        ("000-first.json", make_batch("2021-06-15", 25.0)),
        ("001-second.json", make_batch("2021-06-16", 26.5)),
        ("002-corrupt.json", "{this is not json"),
    ]
    config = write_fixture_env(tmp_path, provider_files=files)
    app = create_app(config)
    state = app.state.wx
    with TestClient(app) as client:
        assert client.get("/healthz").json()["snapshot_version"] == 2
        assert state.poll_provider() == 3
        assert state.poll_provider() == 4
        # corrupt file: skipped with a log, service stays healthy
        assert state.poll_provider() is None
        assert state.poll_provider() is None  # exhausted -> no-op
        r = client.get("/healthz")
        assert r.json()["snapshot_version"] == 4
        r = client.get("/v1/forecast", params={
            "lat": "-0.1", "lon": "0.0", "date": "2021-06-17", "var": "temperature"})
        assert r.json()["value"] == 26.5
        assert r.json()["method"] == "persistence"


# --- GET side-effect freeness ---

def state_digest(app, config):
    h = hashlib.sha256()
    h.update(repr(app.state.wx.store.current().content_key()).encode())
    h.update(repr(app.state.wx.matrix.content_key()).encode())
    for root, _, names in sorted(os.walk(config.snapshot_dir)):
        for n in sorted(names):
            h.update(open(os.path.join(root, n), "rb").read())
    h.update(open(config.matrix_path, "rb").read())
    return h.hexdigest()


def gets_for_comparison():
    return [
        ("/healthz", {}),
        ("/v1/forecast", {"lat": "-0.1", "lon": "0.0", "date": "2021-06-15",
                          "var": "temperature"}),
        ("/v1/forecast", {"lat": "0.1", "lon": "0.1", "date": "2021-06-20",
                          "var": "rainfall"}),
        ("/v1/route", {"from_lat": "0.0", "from_lon": "0.0", "to_lat": "0.0",
                       "to_lon": "0.1", "depart": "2021-06-15"}),
        ("/v1/recommendations", {"user": "ada", "n": "4", "lambda": "0.3",
                                 "date": "2021-06-15"}),
        ("/v1/grid", {"var": "temperature", "date": "2021-06-15", "format": "json"}),
        ("/v1/clusters", {"k": "2"}),
        ("/v1/forecast", {"lat": "91", "lon": "0", "date": "2021-06-15",
                          "var": "temperature"}),
    ]


def test_gets_are_side_effect_free(env):
    client, app, config = env
    before = state_digest(app, config)
    for path, params in gets_for_comparison() * 3:
        client.get(path, params=params)
    assert state_digest(app, config) == before


# --- concurrency ---

def test_concurrent_matches_serial(tmp_path):
    config = write_fixture_env(tmp_path)
    app = create_app(config)
    requests = gets_for_comparison() * 8  # 64 mixed requests
    with TestClient(app) as client:
        serial = [(client.get(p, params=q).status_code,
                   client.get(p, params=q).content) for p, q in requests]

        def worker(req):
            path, params = req
            r = client.get(path, params=params)
            return r.status_code, r.content

        with ThreadPoolExecutor(max_workers=32) as pool:
            concurrent = list(pool.map(worker, requests))
    assert concurrent == serial


def test_snapshot_version_header_everywhere(env):
    client, _, _ = env
    for path, params in gets_for_comparison():
        r = client.get(path, params=params)
        assert r.headers.get("X-Snapshot-Version") == "2", path


def test_unknown_query_params_ignored(env):
    client, _, _ = env
    r = client.get("/v1/forecast", params={
        "lat": "-0.1", "lon": "0.0", "date": DEPART.isoformat(),
        "var": "temperature", "mystery": "42", "debug": "true"})
    assert r.status_code == 200
    assert r.json()["method"] == "persistence"


# --- config file + env overrides ---

def test_config_from_file_with_env_overrides(tmp_path, monkeypatch):
    store_dir = tmp_path / "data"
    doc = {
        "listen": {"host": "0.0.0.0", "port": 9000},
        "snapshot_dir": str(tmp_path / "ignored"),
        "recommend": {"k": 7, "blend": 0.5, "n": 3},
        "router_weights": {"rain_penalty": 1.0},
        "provider": {"mode": "off"},
    }
    path = tmp_path / "service.json"
    path.write_text(json.dumps(doc))
    monkeypatch.setenv("WXCAST_LISTEN", "127.0.0.1:9777")
    monkeypatch.setenv("WXCAST_SNAPSHOT_DIR", str(store_dir))
    config = ApiConfig.from_file(str(path))
    assert (config.host, config.port) == ("127.0.0.1", 9777)
    assert config.snapshot_dir == str(store_dir)
    assert config.recommend_k == 7
    assert config.router_weights.rain_penalty == 1.0
    assert config.router_weights.p_ref_mm == 5.0  # defaults kept


def test_config_rejects_missing_paths(tmp_path):
    path = tmp_path / "service.json"
    path.write_text(json.dumps({"road_graph": str(tmp_path / "ghost.geojson")}))
    with pytest.raises(FileNotFoundError):
        ApiConfig.from_file(str(path))


def test_config_rejects_bad_provider(tmp_path):
    path = tmp_path / "service.json"
    path.write_text(json.dumps({"provider": {"mode": "replay"}}))
    with pytest.raises(ValueError):
        ApiConfig.from_file(str(path))
