"""Deterministic raster heatmaps of grid fields, encoded as binary PPM.

Color interpolation is pinned down exactly (linear between anchors, each
channel rounded half-up) so rendered bytes are stable across platforms and
can be golden-tested by checksum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRange, EmptyField


@dataclass(frozen=True)
class Palette:
    name: str
    stops: tuple  # ((anchor, (r, g, b)), ...) anchors strictly increasing 0..1
    missing_color: tuple = (200, 200, 200)

    def __post_init__(self):
        anchors = [a for a, _ in self.stops]
        if len(anchors) < 2 or anchors[0] != 0.0 or anchors[-1] != 1.0:
            raise ValueError("palette anchors must start at 0 and end at 1")
        if any(b <= a for a, b in zip(anchors, anchors[1:])):
            raise ValueError("palette anchors must be strictly increasing")


THERMAL = Palette("thermal", ((0.0, (0, 0, 255)), (0.5, (255, 255, 255)),
                              (1.0, (255, 0, 0))))
RAIN = Palette("rain", ((0.0, (255, 255, 255)), (1.0, (8, 48, 107))))
GRAYSCALE = Palette("grayscale", ((0.0, (0, 0, 0)), (1.0, (255, 255, 255))))

PALETTES = {p.name: p for p in (THERMAL, RAIN, GRAYSCALE)}

# categorical colors for cluster-id maps (tab10)
CATEGORICAL_COLORS = (
    (31, 119, 180), (255, 127, 14), (44, 160, 44), (214, 39, 40),
    (148, 103, 189), (140, 86, 75), (227, 119, 194), (127, 127, 127),
    (188, 189, 34), (23, 190, 207),
)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def color_of(value: float, lo: float, hi: float, palette: Palette) -> tuple:
    """Linear palette interpolation of value over [lo, hi], clamped."""
    if not lo < hi:
        raise DegenerateRange(f"lo {lo} must be < hi {hi}")
    t = (value - lo) / (hi - lo)
    t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
    stops = palette.stops
    for (a0, c0), (a1, c1) in zip(stops, stops[1:]):
        if t <= a1:
            s = (t - a0) / (a1 - a0)
            return tuple(_round_half_up(f + (g - f) * s) for f, g in zip(c0, c1))
    return stops[-1][1]


def color_of_category(category: int) -> tuple:
    return CATEGORICAL_COLORS[int(category) % len(CATEGORICAL_COLORS)]


@dataclass(frozen=True)
class RasterImage:
    width: int
    height: int
    pixels: bytes  # row-major rgb triples

    def __post_init__(self):
        if len(self.pixels) != 3 * self.width * self.height:
            raise ValueError("pixel buffer size does not match dimensions")


def field_range(values, mask):
    """Auto lo/hi from unmasked values; constant fields widen by +-0.5."""
    vals = np.asarray(values, dtype=np.float64)[~np.asarray(mask, dtype=bool)]
    if vals.size == 0:
        raise EmptyField("every cell is masked")
    lo, hi = float(vals.min()), float(vals.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def _blocks(cell_colors, n_lat, n_lon, scale, lat_ascending):
    rows = []
    lat_order = range(n_lat - 1, -1, -1) if lat_ascending else range(n_lat)
    for li in lat_order:
        row = bytearray()
        for lo_i in range(n_lon):
            row += bytes(cell_colors[li][lo_i]) * scale
        rows.extend([bytes(row)] * scale)
    return b"".join(rows)


def render_field(values, mask, lo: float, hi: float, palette: Palette,
                 scale: int = 1, lat_ascending: bool = True) -> RasterImage:
    """Rasterize a (lat, lon) field, one scale x scale block per cell, north up."""
    values = np.asarray(values, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if values.ndim != 2 or values.size == 0:
        raise EmptyField("field must be a nonempty 2-D array")
    if scale < 1:
        raise ValueError("scale must be >= 1")
    n_lat, n_lon = values.shape
    colors = [[palette.missing_color if mask[li, lo_i]
               else color_of(float(values[li, lo_i]), lo, hi, palette)
               for lo_i in range(n_lon)] for li in range(n_lat)]
    pixels = _blocks(colors, n_lat, n_lon, scale, lat_ascending)
    return RasterImage(width=n_lon * scale, height=n_lat * scale, pixels=pixels)


def render_categories(ids, mask, scale: int = 1, lat_ascending: bool = True,
                      missing_color: tuple = (200, 200, 200)) -> RasterImage:
    """Rasterize a (lat, lon) field of cluster ids with the categorical colors."""
    ids = np.asarray(ids)
    mask = np.asarray(mask, dtype=bool)
    if ids.ndim != 2 or ids.size == 0:
        raise EmptyField("field must be a nonempty 2-D array")
    n_lat, n_lon = ids.shape
    colors = [[missing_color if mask[li, lo_i] else color_of_category(ids[li, lo_i])
               for lo_i in range(n_lon)] for li in range(n_lat)]
    pixels = _blocks(colors, n_lat, n_lon, scale, lat_ascending)
    return RasterImage(width=n_lon * scale, height=n_lat * scale, pixels=pixels)


def encode_ppm(image: RasterImage) -> bytes:
    """Binary PPM (P6), maxval 255."""
    return b"P6\n%d %d\n255\n" % (image.width, image.height) + image.pixels


def decode_ppm(data: bytes) -> RasterImage:
    """Inverse of encode_ppm for the canonical layout it emits."""
    if not data.startswith(b"P6\n"):
        raise ValueError("not a canonical P6 stream")
    dims_end = data.index(b"\n", 3)
    w, h = (int(x) for x in data[3:dims_end].split(b" "))
    maxval_end = data.index(b"\n", dims_end + 1)
    if data[dims_end + 1:maxval_end] != b"255":
        raise ValueError("unsupported maxval")
    return RasterImage(width=w, height=h, pixels=data[maxval_end + 1:])


def sidecar(variable: str, date_iso: str, lo: float, hi: float,
            palette: Palette, grid_shape) -> dict:
    """Metadata written next to auto-ranged renders to keep them reproducible."""
    return {"variable": variable, "date": date_iso, "lo": lo, "hi": hi,
            "palette": palette.name, "grid_shape": list(grid_shape)}
