"""Immutable per-grid-cell time-series store with versioned snapshots.

Observations are keyed by (variable kind, cell, epoch day). Ingestion never
mutates an existing snapshot: it builds a fresh one with a bumped version,
so readers can keep querying the old snapshot while a new one is published.
"""

from __future__ import annotations

import json
import math
import os
import re
import shutil
import struct
from dataclasses import dataclass
from datetime import date, timedelta
from typing import NamedTuple, Optional, Union

import numpy as np

from . import ncgrid
from .errors import (
    AxisMismatch,
    CellOutOfRange,
    EmptyInput,
    EmptyStore,
    MalformedHeader,
    UnknownVariable,
)

EARTH_RADIUS_KM = 6371.0
UNIX_EPOCH = date(1970, 1, 1)

KNOWN_KINDS = (ncgrid.KIND_TEMPERATURE, ncgrid.KIND_PRESSURE, ncgrid.KIND_RAINFALL)

COL_MAGIC = b"WXCOL1"


def to_epoch_day(value: Union[int, date]) -> int:
    """Days since 1970-01-01 from a date or a pass-through int."""
    if isinstance(value, (int, np.integer)):
        return int(value)
    return (value - UNIX_EPOCH).days


def from_epoch_day(day: int) -> date:
    return UNIX_EPOCH + timedelta(days=int(day))


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} out of [-90, 90]")
        if not math.isfinite(self.lon):
            raise ValueError(f"longitude {self.lon} not finite")
        lon = ((self.lon + 180.0) % 360.0) - 180.0
        object.__setattr__(self, "lon", lon)


class CellKey(NamedTuple):
    lat_idx: int
    lon_idx: int


@dataclass(frozen=True)
class CellSeries:
    variable: str
    times: np.ndarray  # epoch days, strictly increasing
    values: np.ndarray
    cell: CellKey

    def __len__(self):
        return len(self.times)


def haversine_km(lat1, lon1, lat2, lon2):
    """Great-circle distance in km; accepts scalars or numpy arrays (degrees)."""
    lat1, lon1 = np.radians(lat1), np.radians(lon1)
    lat2, lon2 = np.radians(lat2), np.radians(lon2)
    a = (np.sin((lat2 - lat1) / 2.0) ** 2
         + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2.0) ** 2)
    return 2.0 * EARTH_RADIUS_KM * np.arctan2(np.sqrt(a), np.sqrt(1.0 - a))


def _freeze(arr):
    arr.setflags(write=False)
    return arr


class StoreSnapshot:
    """Immutable view of all observations: axes + per-kind, per-cell series."""

    def __init__(self, lats, lons, data, provenance, version):
        self.lats = _freeze(np.asarray(lats, dtype=np.float64))
        self.lons = _freeze(np.asarray(lons, dtype=np.float64))
        # data: kind -> {CellKey: (times int64, values float64)}
        self._data = data
        self.provenance = tuple(provenance)
        self.version = version

    @classmethod
    def empty(cls) -> "StoreSnapshot":
        return cls(np.empty(0), np.empty(0), {}, (), 0)

    @property
    def is_empty(self) -> bool:
        return self.lats.size == 0 or self.lons.size == 0

    @property
    def grid_shape(self):
        return (len(self.lats), len(self.lons))

    def variables(self):
        return sorted(self._data)

    def cells_with(self, variable: str):
        """Cell keys holding at least one observation of the given kind."""
        return sorted(self._data.get(variable, {}))

    def cell_point(self, cell: CellKey) -> GeoPoint:
        self._check_cell(cell)
        return GeoPoint(float(self.lats[cell.lat_idx]), float(self.lons[cell.lon_idx]))

    def _check_cell(self, cell: CellKey):
        if not (0 <= cell.lat_idx < len(self.lats) and 0 <= cell.lon_idx < len(self.lons)):
            raise CellOutOfRange(f"cell {tuple(cell)} outside grid {self.grid_shape}")

    def ingest(self, source_data, source: Optional[str] = None) -> "StoreSnapshot":
        """Union this snapshot with a dataset (or CSV text); returns a new snapshot.

        Duplicate (cell, variable, day) observations keep the newer ingest.
        """
        if isinstance(source_data, str):
            ds = ncgrid.dataset_from_csv(source_data, source=source or "csv")
        else:
            ds = source_data
        if not ds.fields:
            raise EmptyInput("dataset has no field variables")

        if self.is_empty:
            lats, lons = ds.lats, ds.lons
        else:
            if not (np.array_equal(self.lats, ds.lats) and np.array_equal(self.lons, ds.lons)):
                raise AxisMismatch("dataset axes differ from the store grid")
            lats, lons = self.lats, self.lons

        epoch_off = (ds.epoch - UNIX_EPOCH).days
        days = np.asarray([epoch_off + int(round(float(t))) for t in ds.times], dtype=np.int64)

        incoming = {}
        for name, arr in ds.fields.items():
            kind = ds.kinds[name]
            mask = ds.fill_mask[name]
            per_kind = incoming.setdefault(kind, {})
            keep = ~mask
            for li in range(arr.shape[1]):
                for lo in range(arr.shape[2]):
                    col = keep[:, li, lo]
                    if not col.any():
                        continue
                    cell = CellKey(li, lo)
                    obs = per_kind.setdefault(cell, {})
                    for ti in np.nonzero(col)[0]:
                        obs[int(days[ti])] = float(arr[ti, li, lo])
        if not incoming:
            raise EmptyInput("dataset contributes no unmasked observations")

        merged = {k: dict(v) for k, v in self._data.items()}
        for kind, cells in incoming.items():
            out = merged.setdefault(kind, {})
            for cell, obs in cells.items():
                old = out.get(cell)
                if old is not None:
                    base = dict(zip(old[0].tolist(), old[1].tolist()))
                else:
                    base = {}
                base.update(obs)  # newer ingest wins on duplicate days
                t = np.array(sorted(base), dtype=np.int64)
                v = np.array([base[d] for d in t.tolist()], dtype=np.float64)
                out[cell] = (_freeze(t), _freeze(v))

        src = source or ds.source or "unnamed"
        return StoreSnapshot(lats, lons, merged, self.provenance + (src,), self.version + 1)

    def nearest_cell(self, point: GeoPoint) -> CellKey:
        """Cell center minimizing haversine distance; ties break toward lower
        lat index then lower lon index."""
        if self.is_empty:
            raise EmptyStore("no grid ingested yet")
        dist = haversine_km(self.lats[:, None], self.lons[None, :], point.lat, point.lon)
        flat = int(np.argmin(dist))  # first minimum in row-major order
        return CellKey(flat // len(self.lons), flat % len(self.lons))

    def series(self, cell: CellKey, variable: str, start=None, end=None) -> CellSeries:
        """Sub-series for [start, end] inclusive (dates or epoch days); may be empty."""
        self._check_cell(cell)
        if variable not in KNOWN_KINDS:
            raise UnknownVariable(variable)
        entry = self._data.get(variable, {}).get(cell)
        if entry is None:
            t = np.empty(0, dtype=np.int64)
            v = np.empty(0, dtype=np.float64)
            return CellSeries(variable, t, v, cell)
        t, v = entry
        lo = 0 if start is None else int(np.searchsorted(t, to_epoch_day(start), side="left"))
        hi = len(t) if end is None else int(np.searchsorted(t, to_epoch_day(end), side="right"))
        return CellSeries(variable, t[lo:hi], v[lo:hi], cell)

    def content_key(self):
        """Hashable digest of all observations, for change-detection in tests."""
        items = []
        for kind in sorted(self._data):
            for cell in sorted(self._data[kind]):
                t, v = self._data[kind][cell]
                items.append((kind, tuple(cell), t.tobytes(), v.tobytes()))
        return tuple(items)


# --- on-disk layout: one directory per version ---

def save_snapshot(snapshot: StoreSnapshot, directory) -> None:
    """Write manifest.json plus one little-endian .col file per variable."""
    os.makedirs(directory, exist_ok=True)
    manifest = {
        "version": snapshot.version,
        "lats": snapshot.lats.tolist(),
        "lons": snapshot.lons.tolist(),
        "variables": snapshot.variables(),
        "provenance": list(snapshot.provenance),
    }
    with open(os.path.join(directory, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=1)
    n_cells = len(snapshot.lats) * len(snapshot.lons)
    for kind in snapshot.variables():
        cells = snapshot._data[kind]
        with open(os.path.join(directory, f"{kind}.col"), "wb") as f:
            f.write(COL_MAGIC)
            f.write(struct.pack("<I", n_cells))
            for li in range(len(snapshot.lats)):
                for lo in range(len(snapshot.lons)):
                    entry = cells.get(CellKey(li, lo))
                    if entry is None:
                        f.write(struct.pack("<I", 0))
                        continue
                    t, v = entry
                    f.write(struct.pack("<I", len(t)))
                    for day, val in zip(t.tolist(), v.tolist()):
                        f.write(struct.pack("<qf", day, val))


def load_snapshot(directory) -> StoreSnapshot:
    """Read a snapshot directory written by save_snapshot."""
    with open(os.path.join(directory, "manifest.json")) as f:
        manifest = json.load(f)
    lats = np.asarray(manifest["lats"], dtype=np.float64)
    lons = np.asarray(manifest["lons"], dtype=np.float64)
    n_lon = len(lons)
    data = {}
    for kind in manifest["variables"]:
        path = os.path.join(directory, f"{kind}.col")
        with open(path, "rb") as f:
            raw = f.read()
        if raw[:6] != COL_MAGIC:
            raise MalformedHeader(f"{path}: bad column-file magic")
        (n_cells,) = struct.unpack_from("<I", raw, 6)
        if n_cells != len(lats) * n_lon:
            raise MalformedHeader(f"{path}: cell count {n_cells} != grid size")
        pos = 10
        cells = {}
        for idx in range(n_cells):
            (n,) = struct.unpack_from("<I", raw, pos)
            pos += 4
            if n:
                rec = np.frombuffer(raw, dtype=np.dtype([("day", "<i8"), ("val", "<f4")]),
                                    count=n, offset=pos)
                pos += 12 * n
                cell = CellKey(idx // n_lon, idx % n_lon)
                cells[cell] = (_freeze(rec["day"].astype(np.int64)),
                               _freeze(rec["val"].astype(np.float64)))
        data[kind] = cells
    return StoreSnapshot(lats, lons, data, manifest["provenance"], manifest["version"])


_VERSION_DIR = re.compile(r"^v(\d{5})$")


class Store:
    """Versioned snapshot directory: publish() persists and atomically swaps."""

    def __init__(self, directory):
        self.directory = str(directory)
        os.makedirs(self.directory, exist_ok=True)
        self._current = StoreSnapshot.empty()
        latest = self._latest_dir()
        if latest is not None:
            self._current = load_snapshot(latest)

    def _latest_dir(self):
        best, best_v = None, -1
        for name in os.listdir(self.directory):
            m = _VERSION_DIR.match(name)
            if m and int(m.group(1)) > best_v:
                best_v = int(m.group(1))
                best = os.path.join(self.directory, name)
        return best

    def current(self) -> StoreSnapshot:
        return self._current

    def publish(self, snapshot: StoreSnapshot) -> StoreSnapshot:
        """Persist to v<NNNNN> via temp-dir rename, then swap the live reference."""
        final = os.path.join(self.directory, f"v{snapshot.version:05d}")
        tmp = os.path.join(self.directory, f".tmp-v{snapshot.version:05d}")
        save_snapshot(snapshot, tmp)
        if os.path.exists(final):
            shutil.rmtree(final)
        os.replace(tmp, final)
        self._current = snapshot
        return snapshot
