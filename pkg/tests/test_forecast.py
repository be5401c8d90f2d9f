"""Forecast model tests: persistence, climatology, trend, dispatch."""

import math
import random
from datetime import date, timedelta

import numpy as np
import pytest

from wxcast import forecast
from wxcast.errors import InsufficientYears, NoData
from wxcast.store import CellKey, CellSeries, GeoPoint, StoreSnapshot, to_epoch_day


def make_series(obs, kind="temperature"):
    """obs: list of (date, value), in increasing date order."""
    times = np.array([to_epoch_day(d) for d, _ in obs], dtype=np.int64)
    values = np.array([v for _, v in obs], dtype=np.float64)
    return CellSeries(kind, times, values, CellKey(0, 0))


def single_cell_snapshot(obs, var_name="temp"):
    rows = ["time,lat,lon," + var_name]
    for d, v in obs:
        rows.append(f"{to_epoch_day(d)},10,20,{v!r}")
    return StoreSnapshot.empty().ingest("\n".join(rows) + "\n")


def normal_equations_oracle(xs, ys):
    # direct 2x2 normal-equations solve, no shared code with fit_line
    n = len(xs)
    sx = sum(xs)
    sxx = sum(x * x for x in xs)
    sy = sum(ys)
    sxy = sum(x * y for x, y in zip(xs, ys))
    det = n * sxx - sx * sx
    slope = (n * sxy - sx * sy) / det
    intercept = (sxx * sy - sx * sxy) / det
    return slope, intercept


def rel_close(a, b, tol=1e-9):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


# --- persistence ---

def test_persistence_single_day():
    s = make_series([(date(2020, 7, 1), 20.0), (date(2020, 7, 2), 21.5)])
    out = forecast.persistence_forecast(s, 1)
    assert out == [(date(2020, 7, 3), 21.5)]


def test_persistence_five_days_constant():
    s = make_series([(date(2020, 7, 2), 21.5)])
    out = forecast.persistence_forecast(s, 5)
    assert len(out) == 5
    assert all(v == 21.5 for _, v in out)
    assert [d for d, _ in out] == [date(2020, 7, 2) + timedelta(days=i) for i in range(1, 6)]


def test_persistence_empty_series():
    empty = CellSeries("temperature", np.empty(0, dtype=np.int64),
                       np.empty(0), CellKey(0, 0))
    with pytest.raises(NoData):
        forecast.persistence_forecast(empty, 1)


def test_persistence_idempotent_on_own_extension():
    s = make_series([(date(2020, 7, 1), 17.25)])
    ext = forecast.persistence_forecast(s, 3)
    extended = make_series([(date(2020, 7, 1), 17.25)] + ext)
    again = forecast.persistence_forecast(extended, 3)
    assert all(v == 17.25 for _, v in again)


# --- climatology ---

def test_climatology_hand_stats():
    s = make_series([(date(2018, 7, 10), 20.0), (date(2019, 7, 10), 22.0),
                     (date(2020, 7, 10), 24.0)])
    st = forecast.climatology(s, 7)
    assert st.mean == 22.0
    assert abs(st.stddev - math.sqrt(8.0 / 3.0)) < 1e-12
    assert st.n == 3


def test_climatology_single_observation():
    s = make_series([(date(2020, 7, 10), 20.0)])
    st = forecast.climatology(s, 7)
    assert (st.mean, st.stddev, st.n) == (20.0, 0.0, 1)


def test_climatology_month_without_data():
    s = make_series([(date(2020, 7, 10), 20.0)])
    with pytest.raises(NoData):
        forecast.climatology(s, 2)


def test_climatology_bounds_property():
    rng = random.Random(3)
    for _ in range(50):
        obs = []
        d = date(2000, 1, 1)
        for i in range(rng.randint(1, 200)):
            obs.append((d + timedelta(days=i * 3), rng.uniform(-30, 40)))
        s = make_series(obs)
        in_month = [v for dd, v in obs if dd.month == 7]
        if not in_month:
            continue
        st = forecast.climatology(s, 7)
        assert min(in_month) <= st.mean <= max(in_month)


# --- monthly aggregates ---

def test_rainfall_aggregates_sum_within_month():
    s = make_series([(date(2000, 7, 1), 5.0), (date(2000, 7, 15), 7.0),
                     (date(2001, 7, 3), 1.0)], kind="rainfall")
    assert forecast.monthly_aggregates(s, 7) == {2000: 12.0, 2001: 1.0}


def test_temperature_aggregates_mean_within_month():
    s = make_series([(date(2000, 7, 1), 10.0), (date(2000, 7, 15), 20.0),
                     (date(2001, 7, 3), 30.0)])
    assert forecast.monthly_aggregates(s, 7) == {2000: 15.0, 2001: 30.0}


# --- trend ---

def linear_july_series(years=range(2000, 2011), a=10.0, b=0.02, base_year=2000):
    return make_series([(date(y, 7, 15), a + b * (y - base_year)) for y in years])


def test_trend_exact_linear_recovers_line():
    s = linear_july_series()
    value, fit = forecast.trend_projection(s, 7, 2100)
    assert rel_close(fit.slope, 0.02)
    assert rel_close(fit.intercept, 10.0 - 0.02 * 2000)
    assert rel_close(value, 12.0)
    assert fit.n == 11 and fit.month == 7


def test_trend_single_year_insufficient():
    s = make_series([(date(2000, 7, 1), 10.0), (date(2000, 7, 20), 11.0)])
    with pytest.raises(InsufficientYears):
        forecast.trend_projection(s, 7, 2100)


def test_trend_matches_normal_equations_oracle():
    rng = random.Random(11)
    for _ in range(50):
        years = sorted(rng.sample(range(1980, 2021), rng.randint(2, 20)))
        a, b = rng.uniform(-5, 25), rng.uniform(-0.1, 0.1)
        obs = [(date(y, 7, rng.randint(1, 28)), a + b * y + rng.gauss(0, 0.5))
               for y in years]
        s = make_series(obs)
        _, fit = forecast.trend_projection(s, 7, 2100)
        slope_o, icept_o = normal_equations_oracle(years, [v for _, v in obs])
        assert rel_close(fit.slope, slope_o)
        assert rel_close(fit.intercept, icept_o)


def test_trend_residual_orthogonality():
    rng = random.Random(12)
    for _ in range(30):
        xs = sorted(rng.sample(range(1950, 2030), rng.randint(3, 30)))
        ys = [rng.uniform(-50, 50) for _ in xs]
        slope, intercept = forecast.fit_line(xs, ys)
        resid = [y - (intercept + slope * x) for x, y in zip(xs, ys)]
        scale_r = max(1.0, sum(abs(y) for y in ys))
        scale_rx = max(1.0, sum(abs(x * y) for x, y in zip(xs, ys)))
        assert abs(sum(resid)) <= 1e-9 * scale_r
        assert abs(sum(r * x for r, x in zip(resid, xs))) <= 1e-9 * scale_rx


def test_rainfall_projection_clamped_nonnegative():
    s = make_series([(date(y, 7, 1), max(0.0, 10.0 - 2.0 * (y - 2000)))
                     for y in range(2000, 2006)], kind="rainfall")
    value, _ = forecast.trend_projection(s, 7, 2100)
    assert value == 0.0


# --- forecast_at dispatch ---

def daily_snapshot(end=date(2020, 7, 31), days=730):
    obs = [(end - timedelta(days=days - 1 - i), 15.0 + (i % 10)) for i in range(days)]
    return single_cell_snapshot(obs), obs


def test_dispatch_next_day_is_persistence():
    snap, obs = daily_snapshot()
    rep = forecast.forecast_at(snap, GeoPoint(10.0, 20.0), obs[-1][0] + timedelta(days=1),
                               "temperature")
    assert rep.method == "persistence"
    assert rep.value == obs[-1][1]
    assert rep.basis_last == obs[-1][0]


def test_dispatch_six_months_ahead_is_climatology():
    snap, obs = daily_snapshot()
    target = date(2021, 1, 15)
    rep = forecast.forecast_at(snap, GeoPoint(10.0, 20.0), target, "temperature")
    assert rep.method == "climatology"
    jan_vals = [v for d, v in obs if d.month == 1]
    assert rel_close(rep.value, sum(jan_vals) / len(jan_vals))


def test_dispatch_far_future_is_trend():
    snap = single_cell_snapshot([(date(y, 7, 15), 10.0 + 0.02 * (y - 2000))
                                 for y in range(2000, 2011)])
    rep = forecast.forecast_at(snap, GeoPoint(10.0, 20.0), date(2100, 7, 15), "temperature")
    assert rep.method == "trend"
    assert rel_close(rep.value, 12.0)


def test_dispatch_totality_random():
    rng = random.Random(21)
    snap, _ = daily_snapshot()
    p = GeoPoint(10.0, 20.0)
    for _ in range(200):
        target = date(2020, 7, 31) + timedelta(days=rng.randint(-300, 40000))
        try:
            rep = forecast.forecast_at(snap, p, target, "temperature")
            assert rep.method in ("persistence", "climatology", "trend")
        except NoData:
            pass


def test_forecast_report_dict_shape():
    snap, obs = daily_snapshot()
    rep = forecast.forecast_at(snap, GeoPoint(10.2, 19.7), obs[-1][0], "temperature")
    d = rep.to_dict()
    assert d["cell"] == {"lat": 10.0, "lon": 20.0, "lat_idx": 0, "lon_idx": 0}
    assert d["basis"]["count"] == len(obs)
    assert d["method"] == "persistence"
