"""Forecast models: persistence, monthly climatology, per-month linear trend.

Dispatch in forecast_at: persistence within 3 days of the last observation,
climatology through the year after the last observed year, OLS trend beyond.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

from .errors import EmptyStore, InsufficientYears, NoData
from .ncgrid import KIND_RAINFALL
from .store import CellKey, CellSeries, GeoPoint, StoreSnapshot, from_epoch_day, to_epoch_day

PERSISTENCE_HORIZON_DAYS = 3

METHOD_PERSISTENCE = "persistence"
METHOD_CLIMATOLOGY = "climatology"
METHOD_TREND = "trend"


@dataclass(frozen=True)
class MonthlyStats:
    month: int
    mean: float
    stddev: float
    n: int


@dataclass(frozen=True)
class TrendFit:
    slope: float  # units per year
    intercept: float  # units at year 0
    n: int
    month: int


@dataclass(frozen=True)
class ForecastReport:
    point: GeoPoint
    cell: CellKey
    cell_point: GeoPoint
    variable: str
    target_date: date
    value: float
    method: str
    basis_count: int
    basis_last: date

    def to_dict(self) -> dict:
        return {
            "point": {"lat": self.point.lat, "lon": self.point.lon},
            "cell": {"lat": self.cell_point.lat, "lon": self.cell_point.lon,
                     "lat_idx": self.cell.lat_idx, "lon_idx": self.cell.lon_idx},
            "variable": self.variable,
            "date": self.target_date.isoformat(),
            "value": self.value,
            "method": self.method,
            "basis": {"count": self.basis_count,
                      "last_observation": self.basis_last.isoformat()},
        }


def persistence_forecast(series: CellSeries, horizon_days: int):
    """Extend the last observation forward: one entry per day after it."""
    if len(series) == 0:
        raise NoData("empty series")
    if horizon_days < 1:
        raise ValueError("horizon_days must be positive")
    last_day = int(series.times[-1])
    last_value = float(series.values[-1])
    start = from_epoch_day(last_day)
    return [(start + timedelta(days=i), last_value) for i in range(1, horizon_days + 1)]


def _dates_of(series):
    return [from_epoch_day(d) for d in series.times.tolist()]


def climatology(series: CellSeries, month: int) -> MonthlyStats:
    """Mean and population stddev of all observations in the calendar month."""
    if not 1 <= month <= 12:
        raise ValueError(f"month {month} out of range")
    if len(series) == 0:
        raise NoData("empty series")
    vals = [float(v) for d, v in zip(_dates_of(series), series.values.tolist())
            if d.month == month]
    if not vals:
        raise NoData(f"no observations in month {month}")
    mean = sum(vals) / len(vals)
    var = sum((v - mean) ** 2 for v in vals) / len(vals)
    return MonthlyStats(month=month, mean=mean, stddev=math.sqrt(var), n=len(vals))


def monthly_aggregates(series: CellSeries, month: int) -> dict:
    """Per-year aggregate for one calendar month: mean of the month's
    observations, except rainfall which sums within the month."""
    per_year = {}
    for d, v in zip(_dates_of(series), series.values.tolist()):
        if d.month == month:
            per_year.setdefault(d.year, []).append(float(v))
    agg = {}
    for year, vals in per_year.items():
        agg[year] = sum(vals) if series.variable == KIND_RAINFALL else sum(vals) / len(vals)
    return agg


def fit_line(xs, ys) -> tuple:
    """OLS slope/intercept via the mean-centered form."""
    n = len(xs)
    xbar = sum(xs) / n
    ybar = sum(ys) / n
    sxx = sum((x - xbar) ** 2 for x in xs)
    sxy = sum((x - xbar) * (y - ybar) for x, y in zip(xs, ys))
    slope = sxy / sxx
    return slope, ybar - slope * xbar


def trend_projection(series: CellSeries, month: int, target_year: int):
    """OLS over (year, monthly aggregate) pairs, evaluated at target_year.

    Rainfall projections are clamped at zero.
    """
    if not 1 <= month <= 12:
        raise ValueError(f"month {month} out of range")
    agg = monthly_aggregates(series, month)
    if len(agg) < 2:
        raise InsufficientYears(
            f"need observations of month {month} in >= 2 years, have {len(agg)}")
    years = sorted(agg)
    values = [agg[y] for y in years]
    slope, intercept = fit_line(years, values)
    value = intercept + slope * target_year
    if series.variable == KIND_RAINFALL:
        value = max(0.0, value)
    fit = TrendFit(slope=slope, intercept=intercept, n=len(years), month=month)
    return value, fit


def forecast_series(series: CellSeries, target_date: date):
    """Dispatch one series: (value, method). Raises NoData when the series is
    empty or the chosen model cannot produce a value."""
    if len(series) == 0:
        raise NoData("empty series")
    last_day = int(series.times[-1])
    last_date = from_epoch_day(last_day)
    target_day = to_epoch_day(target_date)

    if target_day - last_day <= PERSISTENCE_HORIZON_DAYS:
        return float(series.values[-1]), METHOD_PERSISTENCE
    if target_date.year <= last_date.year + 1:
        return climatology(series, target_date.month).mean, METHOD_CLIMATOLOGY
    value, _ = trend_projection(series, target_date.month, target_date.year)
    return value, METHOD_TREND


def grid_forecast(snapshot: StoreSnapshot, variable: str, target: date):
    """Forecast every cell for one date: (values, mask) 2-D arrays over the
    grid; cells without a usable value stay masked."""
    n_lat, n_lon = snapshot.grid_shape
    values = np.zeros((n_lat, n_lon))
    mask = np.ones((n_lat, n_lon), dtype=bool)
    for cell in snapshot.cells_with(variable):
        series = snapshot.series(cell, variable)
        try:
            value, _ = forecast_series(series, target)
        except NoData:
            continue
        values[cell.lat_idx, cell.lon_idx] = value
        mask[cell.lat_idx, cell.lon_idx] = False
    return values, mask


def forecast_at(snapshot: StoreSnapshot, point: GeoPoint, target_date: date,
                variable: str) -> ForecastReport:
    """Personalized forecast for a point: resolve the nearest cell, then pick
    persistence, climatology or trend by horizon."""
    if snapshot.is_empty:
        raise EmptyStore("no data ingested")
    cell = snapshot.nearest_cell(point)
    series = snapshot.series(cell, variable)
    if len(series) == 0:
        raise NoData(f"no {variable} observations at cell {tuple(cell)}")
    value, method = forecast_series(series, target_date)
    return ForecastReport(point=point, cell=cell, cell_point=snapshot.cell_point(cell),
                          variable=variable, target_date=target_date, value=value,
                          method=method, basis_count=len(series),
                          basis_last=from_epoch_day(int(series.times[-1])))
