"""K-means clustering of grid cells by climate features.

Initialization is k-means++ driven by an explicitly specified 64-bit linear
congruential generator, so a (features, k, seed) triple reproduces the same
model on any platform. Lloyd iterations stop on centroid shift < 1e-6 or
after 100 rounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateFeatures,
    DimensionMismatch,
    KTooLarge,
    NoData,
    NoQualifyingCells,
)
from .forecast import climatology
from .ncgrid import KIND_RAINFALL, KIND_TEMPERATURE
from .store import CellKey, StoreSnapshot

FEATURE_NAMES = ("mean_temperature", "temperature_seasonal_amplitude",
                 "mean_rainfall", "rainfall_variance")

MAX_ITERATIONS = 100
SHIFT_TOLERANCE = 1e-6

_LCG_A = 6364136223846793005
_LCG_C = 1442695040888963407
_M64 = (1 << 64) - 1


class Lcg:
    """64-bit LCG (Knuth MMIX constants); floats take the top 53 state bits."""

    def __init__(self, seed: int):
        self.state = (seed ^ 0x9E3779B97F4A7C15) & _M64
        self._next()  # decorrelate adjacent seeds

    def _next(self):
        self.state = (self.state * _LCG_A + _LCG_C) & _M64
        return self.state

    def next_float(self) -> float:
        return (self._next() >> 11) / float(1 << 53)

    def next_index(self, n: int) -> int:
        return min(int(self.next_float() * n), n - 1)


@dataclass
class FeatureMatrix:
    """Standardized per-cell climate features plus the scaling that made them."""

    cells: list
    feature_names: tuple
    values: np.ndarray  # standardized, rows align with cells
    mu: np.ndarray
    sigma: np.ndarray
    dropped_columns: tuple = ()
    excluded_cells: tuple = ()

    @classmethod
    def from_raw(cls, raw, cells=None, feature_names=FEATURE_NAMES, excluded_cells=()):
        raw = np.asarray(raw, dtype=np.float64)
        if raw.ndim != 2:
            raise DegenerateFeatures("feature matrix must be 2-D")
        if cells is None:
            cells = [CellKey(i, 0) for i in range(raw.shape[0])]
        mu = raw.mean(axis=0) if raw.shape[0] else np.zeros(raw.shape[1])
        sigma = raw.std(axis=0) if raw.shape[0] else np.zeros(raw.shape[1])
        keep = sigma > 0
        dropped = tuple(n for n, k in zip(feature_names, keep) if not k)
        kept_names = tuple(n for n, k in zip(feature_names, keep) if k)
        values = (raw[:, keep] - mu[keep]) / sigma[keep]
        if not np.all(np.isfinite(values)):
            raise DegenerateFeatures("non-finite standardized features")
        return cls(cells=list(cells), feature_names=kept_names, values=values,
                   mu=mu[keep], sigma=sigma[keep], dropped_columns=dropped,
                   excluded_cells=tuple(excluded_cells))

    @property
    def n_rows(self):
        return self.values.shape[0]


def _cell_features(snapshot, cell):
    temp = snapshot.series(cell, KIND_TEMPERATURE)
    rain = snapshot.series(cell, KIND_RAINFALL)
    monthly = []
    for m in range(1, 13):
        try:
            monthly.append(climatology(temp, m).mean)
        except NoData:
            pass
    amplitude = max(monthly) - min(monthly) if monthly else 0.0
    rain_vals = rain.values
    return (float(temp.values.mean()), amplitude,
            float(rain_vals.mean()), float(rain_vals.var()))


def build_features(snapshot: StoreSnapshot) -> FeatureMatrix:
    """One feature row per cell holding both temperature and rainfall data."""
    with_temp = set(snapshot.cells_with(KIND_TEMPERATURE))
    with_rain = set(snapshot.cells_with(KIND_RAINFALL))
    qualifying = sorted(with_temp & with_rain)
    excluded = sorted((with_temp | with_rain) - set(qualifying))
    if not qualifying:
        raise NoQualifyingCells("no cell has both temperature and rainfall data")
    raw = np.array([_cell_features(snapshot, c) for c in qualifying])
    return FeatureMatrix.from_raw(raw, cells=qualifying, excluded_cells=excluded)


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray  # (k, d) in standardized space
    assignments: np.ndarray  # row index -> cluster id
    inertia: float
    seed: int
    iterations: int
    inertia_history: list = field(default_factory=list)
    cells: list = field(default_factory=list)
    feature_names: tuple = ()
    mu: np.ndarray = None
    sigma: np.ndarray = None

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "feature_names": list(self.feature_names),
            "mu": self.mu.tolist(),
            "sigma": self.sigma.tolist(),
            "centroids": self.centroids.tolist(),
            "assignments": {str(i): int(a) for i, a in enumerate(self.assignments)},
            "inertia": self.inertia,
            "seed": self.seed,
            "iterations": self.iterations,
            "cells": [[int(c.lat_idx), int(c.lon_idx)] for c in self.cells],
        }


def _sq_dists(rows, centroids):
    # (n, k) squared euclidean distances
    diff = rows[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _plus_plus_init(rows, k, rng):
    n = rows.shape[0]
    idx = rng.next_index(n)
    chosen = [idx]
    d2 = np.sum((rows - rows[idx]) ** 2, axis=1)
    for _ in range(1, k):
        total = float(d2.sum())
        if total > 0.0:
            r = rng.next_float() * total
            idx = int(np.searchsorted(np.cumsum(d2), r, side="right"))
            idx = min(idx, n - 1)
        else:
            idx = rng.next_index(n)
        chosen.append(idx)
        d2 = np.minimum(d2, np.sum((rows - rows[idx]) ** 2, axis=1))
    return rows[chosen].copy()


def kmeans_fit(features: FeatureMatrix, k: int, seed: int = 42) -> ClusterModel:
    """Deterministic k-means++ plus Lloyd iterations over standardized rows.

    The algorithm runs over rows in canonical (lexicographic) order so the
    result is invariant to input row permutation, including the floating-point
    summation order inside centroid updates.
    """
    rows = features.values
    n = rows.shape[0]
    if n == 0 or rows.shape[1] == 0:
        raise DegenerateFeatures("no rows or no varying feature columns")
    if not 1 <= k <= n:
        raise KTooLarge(f"k={k} outside [1, {n}]")

    canon = np.lexsort(rows.T[::-1])  # sort by first column, then second, ...
    work = rows[canon]

    rng = Lcg(seed)
    centroids = _plus_plus_init(work, k, rng)

    history = []
    iterations = 0
    for _ in range(MAX_ITERATIONS):
        iterations += 1
        d2 = _sq_dists(work, centroids)
        labels = np.argmin(d2, axis=1)  # ties resolve to the lower id
        history.append(float(d2[np.arange(n), labels].sum()))
        new_centroids = centroids.copy()
        for j in range(k):
            members = work[labels == j]
            if len(members):
                new_centroids[j] = members.mean(axis=0)
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if shift < SHIFT_TOLERANCE:
            break

    d2 = _sq_dists(work, centroids)
    labels = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(n), labels].sum())
    history.append(inertia)
    assignments = np.empty(n, dtype=np.int64)
    assignments[canon] = labels
    return ClusterModel(k=k, centroids=centroids, assignments=assignments,
                        inertia=inertia, seed=seed, iterations=iterations,
                        inertia_history=history, cells=list(features.cells),
                        feature_names=features.feature_names,
                        mu=features.mu, sigma=features.sigma)


def assign(model: ClusterModel, feature_vector) -> int:
    """Nearest centroid by euclidean distance; ties go to the lower id."""
    vec = np.asarray(feature_vector, dtype=np.float64)
    if vec.shape != (model.centroids.shape[1],):
        raise DimensionMismatch(
            f"vector has shape {vec.shape}, centroids are {model.centroids.shape[1]}-D")
    d2 = np.sum((model.centroids - vec) ** 2, axis=1)
    return int(np.argmin(d2))
