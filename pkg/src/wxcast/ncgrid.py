"""NetCDF classic (CDF-1/CDF-2) reader and CSV converter.

Implements the classic binary container directly: big-endian header with
tagged dimension/attribute/variable lists, names and data blocks padded to
four-byte boundaries, record variables interleaved along the unlimited
dimension. NetCDF-4 is an HDF5 container and is detected and refused.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from datetime import date
from typing import Optional

import numpy as np

from .errors import (
    EmptyInput,
    MalformedHeader,
    MissingCoordinates,
    TruncatedData,
    UnknownVariable,
    UnsupportedFormat,
)

# header tags
NC_DIMENSION = 0x0A
NC_VARIABLE = 0x0B
NC_ATTRIBUTE = 0x0C

# type codes
NC_BYTE = 1
NC_CHAR = 2
NC_SHORT = 3
NC_INT = 4
NC_FLOAT = 5
NC_DOUBLE = 6

TYPE_SIZES = {NC_BYTE: 1, NC_CHAR: 1, NC_SHORT: 2, NC_INT: 4, NC_FLOAT: 4, NC_DOUBLE: 8}
TYPE_DTYPES = {
    NC_BYTE: np.dtype("i1"),
    NC_CHAR: np.dtype("S1"),
    NC_SHORT: np.dtype(">i2"),
    NC_INT: np.dtype(">i4"),
    NC_FLOAT: np.dtype(">f4"),
    NC_DOUBLE: np.dtype(">f8"),
}

# classic-format default fill constants, used when no _FillValue attribute is set
DEFAULT_FILLS = {
    NC_BYTE: -127,
    NC_CHAR: b"\x00",
    NC_SHORT: -32767,
    NC_INT: -2147483647,
    NC_FLOAT: np.float32(9.9692099683868690e36),
    NC_DOUBLE: np.float64(9.9692099683868690e36),
}

KIND_TEMPERATURE = "temperature"
KIND_PRESSURE = "pressure"
KIND_RAINFALL = "rainfall"

UNIX_EPOCH = date(1970, 1, 1)

_LAT_NAMES = {"lat", "latitude"}
_LON_NAMES = {"lon", "longitude"}


@dataclass(frozen=True)
class NcDimension:
    name: str
    length: int  # 0 marks the record (unlimited) dimension


@dataclass(frozen=True)
class NcVariable:
    name: str
    dim_indices: tuple
    type_code: int
    attributes: dict
    vsize: int
    begin_offset: int

    def attr(self, name, default=None):
        return self.attributes.get(name, default)


@dataclass
class GridDataset:
    """Decoded contents of one gridded file: axes, field arrays, fill masks."""

    lats: np.ndarray
    lons: np.ndarray
    times: np.ndarray  # days since `epoch`
    epoch: date
    fields: dict  # name -> float array [time][lat][lon]
    fill_mask: dict  # name -> bool array, True where the cell is missing
    kinds: dict  # name -> temperature | pressure | rainfall
    source: str = ""

    def __post_init__(self):
        if len(self.lats) == 0 or len(self.lons) == 0:
            raise MissingCoordinates("empty coordinate axis")
        _check_strictly_monotonic(self.lats, "lats")
        _check_strictly_monotonic(self.lons, "lons")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise MalformedHeader("time axis not strictly increasing")
        shape = (len(self.times), len(self.lats), len(self.lons))
        for name, arr in self.fields.items():
            if arr.shape != shape or self.fill_mask[name].shape != shape:
                raise MalformedHeader(f"field {name!r} shape {arr.shape} != {shape}")

    @property
    def shape(self):
        return (len(self.times), len(self.lats), len(self.lons))


def _check_strictly_monotonic(axis, label):
    if len(axis) > 1:
        d = np.diff(axis)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise MalformedHeader(f"{label} axis not strictly monotonic")


def detect_format(prefix_bytes: bytes) -> str:
    """Classify a file prefix as classic_v1, classic_v2 or unsupported."""
    if len(prefix_bytes) < 4 or prefix_bytes[:3] != b"CDF":
        return "unsupported"
    if prefix_bytes[3] == 1:
        return "classic_v1"
    if prefix_bytes[3] == 2:
        return "classic_v2"
    return "unsupported"


class _Cursor:
    """Sequential big-endian reader over the header bytes."""

    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise TruncatedData(f"header needs {n} bytes at offset {self.pos}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def i32(self):
        return struct.unpack(">i", self.take(4))[0]

    def i64(self):
        return struct.unpack(">q", self.take(8))[0]

    def non_neg(self, what):
        n = self.i32()
        if n < 0:
            raise MalformedHeader(f"negative {what}: {n}")
        return n

    def pad_to4(self):
        rem = self.pos % 4
        if rem:
            pad = self.take(4 - rem)
            if pad != b"\x00" * len(pad):
                raise MalformedHeader(f"nonzero padding at offset {self.pos - len(pad)}")

    def name(self):
        n = self.non_neg("name length")
        raw = self.take(n)
        self.pad_to4()
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise MalformedHeader(f"undecodable name at offset {self.pos}") from e
        if not text:
            raise MalformedHeader("empty name")
        return text


def _read_list_header(cur, expected_tag, what):
    tag = cur.i32()
    count = cur.i32()
    if tag == 0 and count == 0:
        return 0
    if tag != expected_tag:
        raise MalformedHeader(f"bad {what} tag 0x{tag:02X}")
    if count < 0:
        raise MalformedHeader(f"negative {what} count")
    return count


def _read_attributes(cur):
    attrs = {}
    count = _read_list_header(cur, NC_ATTRIBUTE, "attribute list")
    for _ in range(count):
        name = cur.name()
        type_code = cur.i32()
        if type_code not in TYPE_SIZES:
            raise MalformedHeader(f"bad attribute type {type_code}")
        n = cur.non_neg("attribute length")
        raw = cur.take(n * TYPE_SIZES[type_code])
        cur.pad_to4()
        if type_code == NC_CHAR:
            attrs[name] = raw.decode("utf-8", errors="replace")
        else:
            vals = np.frombuffer(raw, dtype=TYPE_DTYPES[type_code])
            attrs[name] = vals[0].item() if n == 1 else tuple(v.item() for v in vals)
    return attrs


def parse_header(data: bytes):
    """Parse just the header: (version, numrecs, dims, global attrs, variables)."""
    fmt = detect_format(data[:4])
    if fmt == "unsupported":
        raise UnsupportedFormat("not a classic CDF-1/CDF-2 file")
    version = 1 if fmt == "classic_v1" else 2
    cur = _Cursor(data)
    cur.take(4)  # magic

    numrecs = cur.i32()
    if numrecs < 0:
        # includes the STREAMING sentinel 0xFFFFFFFF, which we do not support
        raise MalformedHeader(f"bad numrecs {numrecs}")

    dims = []
    ndims = _read_list_header(cur, NC_DIMENSION, "dimension list")
    for _ in range(ndims):
        name = cur.name()
        length = cur.non_neg("dimension length")
        dims.append(NcDimension(name, length))
    if len({d.name for d in dims}) != len(dims):
        raise MalformedHeader("duplicate dimension names")
    if sum(1 for d in dims if d.length == 0) > 1:
        raise MalformedHeader("more than one record dimension")

    gattrs = _read_attributes(cur)

    variables = []
    nvars = _read_list_header(cur, NC_VARIABLE, "variable list")
    for _ in range(nvars):
        name = cur.name()
        nd = cur.non_neg("dimension count")
        dim_indices = []
        for _ in range(nd):
            idx = cur.i32()
            if not 0 <= idx < len(dims):
                raise MalformedHeader(f"variable {name!r} references dimension {idx}")
            dim_indices.append(idx)
        attrs = _read_attributes(cur)
        type_code = cur.i32()
        if type_code not in TYPE_SIZES:
            raise MalformedHeader(f"bad variable type {type_code}")
        vsize = cur.non_neg("vsize")
        begin = cur.i64() if version == 2 else cur.i32()
        if begin < 0:
            raise MalformedHeader(f"negative begin offset for {name!r}")
        for pos, idx in enumerate(dim_indices):
            if dims[idx].length == 0 and pos != 0:
                raise MalformedHeader(f"record dimension not first in variable {name!r}")
        variables.append(NcVariable(name, tuple(dim_indices), type_code, attrs, vsize, begin))
    if len({v.name for v in variables}) != len(variables):
        raise MalformedHeader("duplicate variable names")

    return version, numrecs, dims, gattrs, variables


def _is_record(var, dims):
    return bool(var.dim_indices) and dims[var.dim_indices[0]].length == 0


def computed_vsize(var, dims) -> int:
    """Space for one variable's block: element count x width, padded to 4 bytes.

    Record variables count one record slab (record dimension omitted).
    """
    n = 1
    for i in var.dim_indices:
        if dims[i].length > 0:
            n *= dims[i].length
    raw = n * TYPE_SIZES[var.type_code]
    return raw + (-raw % 4)


def _record_layout(variables, dims):
    rec_vars = [v for v in variables if _is_record(v, dims)]
    slabs = {}
    for v in rec_vars:
        n = 1
        for i in v.dim_indices[1:]:
            n *= dims[i].length
        slabs[v.name] = n * TYPE_SIZES[v.type_code]
    if len(rec_vars) == 1 and TYPE_SIZES[rec_vars[0].type_code] < 4:
        # single small-type record variable: slabs are not padded
        recsize = slabs[rec_vars[0].name]
    else:
        recsize = sum(s + (-s % 4) for s in slabs.values())
    return rec_vars, slabs, recsize


def _decode_variable(data, var, dims, numrecs, recsize):
    """Read one variable's payload as a numpy array in declared-dimension shape.

    Sizes are computed in Python ints (no silent wrap) and checked against the
    file length before any buffer is touched, so declared shapes can never
    trigger unbounded allocation.
    """
    dtype = TYPE_DTYPES[var.type_code]
    width = TYPE_SIZES[var.type_code]
    if _is_record(var, dims):
        shape = [numrecs] + [dims[i].length for i in var.dim_indices[1:]]
        per_rec = math.prod(shape[1:])
        if numrecs > 0:
            last_end = var.begin_offset + (numrecs - 1) * recsize + per_rec * width
            if last_end > len(data):
                raise TruncatedData(f"record variable {var.name!r} extends past file end")
        records = [
            np.frombuffer(data, dtype=dtype, count=per_rec,
                          offset=var.begin_offset + r * recsize)
            for r in range(numrecs)
        ]
        arr = np.stack(records) if records else np.empty(shape, dtype=dtype)
        return arr.reshape(shape)
    shape = [dims[i].length for i in var.dim_indices]
    count = math.prod(shape)
    if var.begin_offset + count * width > len(data):
        raise TruncatedData(f"variable {var.name!r} extends past file end")
    arr = np.frombuffer(data, dtype=dtype, count=count, offset=var.begin_offset)
    return arr.reshape(shape)


def classify_kind(name: str, units: str = "") -> str:
    """Map a variable name/units pair onto temperature, pressure or rainfall."""
    n = name.lower()
    u = units.strip().lower()
    if u in ("k", "kelvin", "degc", "deg_c", "celsius", "c"):
        return KIND_TEMPERATURE
    if u in ("mm", "kg m-2", "kg/m^2", "mm/day", "mm/month"):
        return KIND_RAINFALL
    if u in ("hpa", "pa", "mb", "millibar", "mbar"):
        return KIND_PRESSURE
    if any(s in n for s in ("rain", "precip", "prcp")) or n == "pr":
        return KIND_RAINFALL
    if any(s in n for s in ("pres", "slp", "psl")):
        return KIND_PRESSURE
    return KIND_TEMPERATURE


def kelvin_to_celsius(values: np.ndarray) -> np.ndarray:
    """Convert Kelvin to Celsius in the array's own precision."""
    return values - values.dtype.type(273.15)


def _parse_time_units(units, default_epoch=UNIX_EPOCH):
    # accepted form: "days since YYYY-MM-DD[ HH:MM:SS]"
    parts = units.split()
    if len(parts) >= 3 and parts[0].lower() == "days" and parts[1].lower() == "since":
        try:
            return date.fromisoformat(parts[2])
        except ValueError:
            pass
    return default_epoch


def parse_classic(file_bytes: bytes, source: str = "") -> GridDataset:
    """Decode a classic-format file into a GridDataset.

    Coordinate axes are taken from 1-D variables named lat/latitude and
    lon/longitude (case-insensitive); the unlimited or "time"-named dimension
    is the time axis. Numeric grid fields over (time, lat, lon) are decoded,
    Kelvin converted to Celsius, and fill values masked.
    """
    version, numrecs, dims, gattrs, variables = parse_header(file_bytes)
    rec_vars, rec_slabs, recsize = _record_layout(variables, dims)

    for v in variables:
        if not _is_record(v, dims):
            if v.begin_offset + computed_vsize(v, dims) > len(file_bytes):
                raise TruncatedData(f"variable {v.name!r} block past file end")

    by_name = {v.name: v for v in variables}

    def coord_var(names):
        for v in variables:
            if v.name.lower() in names and len(v.dim_indices) == 1 and v.type_code != NC_CHAR:
                return v
        return None

    lat_var = coord_var(_LAT_NAMES)
    lon_var = coord_var(_LON_NAMES)
    if lat_var is None or lon_var is None:
        raise MissingCoordinates("no lat/latitude or lon/longitude variable")
    lat_dim = lat_var.dim_indices[0]
    lon_dim = lon_var.dim_indices[0]

    time_dim = None
    for i, d in enumerate(dims):
        if d.length == 0:
            time_dim = i
            break
    if time_dim is None:
        for i, d in enumerate(dims):
            if d.name.lower() == "time":
                time_dim = i
                break

    lats = _decode_variable(file_bytes, lat_var, dims, numrecs, recsize).astype(np.float64)
    lons = _decode_variable(file_bytes, lon_var, dims, numrecs, recsize).astype(np.float64)

    epoch = UNIX_EPOCH
    if time_dim is not None:
        ntime = numrecs if dims[time_dim].length == 0 else dims[time_dim].length
        time_name = dims[time_dim].name
        tvar = by_name.get(time_name)
        if tvar is not None and tvar.dim_indices == (time_dim,) and tvar.type_code != NC_CHAR:
            times = _decode_variable(file_bytes, tvar, dims, numrecs, recsize).astype(np.float64)
            epoch = _parse_time_units(str(tvar.attr("units", "")))
        else:
            times = np.arange(ntime, dtype=np.float64)
        grid_dims = (time_dim, lat_dim, lon_dim)
    else:
        times = np.zeros(1, dtype=np.float64)
        grid_dims = (lat_dim, lon_dim)

    fields, masks, kinds = {}, {}, {}
    for v in variables:
        if v.type_code == NC_CHAR or v.dim_indices != grid_dims:
            continue
        arr = _decode_variable(file_bytes, v, dims, numrecs, recsize)
        if time_dim is None:
            arr = arr.reshape((1,) + arr.shape)
        if v.type_code == NC_FLOAT:
            arr = arr.astype(np.float32)
        else:
            arr = arr.astype(np.float64)
        fill = v.attr("_FillValue")
        if fill is None:
            fill = DEFAULT_FILLS[v.type_code]
        mask = arr == arr.dtype.type(fill)
        units = str(v.attr("units", ""))
        kind = classify_kind(v.name, units)
        if units.strip().lower() in ("k", "kelvin"):
            arr = np.where(mask, arr, kelvin_to_celsius(arr))
        fields[v.name] = arr
        masks[v.name] = mask
        kinds[v.name] = kind

    return GridDataset(lats=lats, lons=lons, times=times, epoch=epoch,
                       fields=fields, fill_mask=masks, kinds=kinds, source=source)


def read_variable(dataset: GridDataset, name: str):
    """Return (values, fill_mask) for one field, shape |times|x|lats|x|lons|."""
    if name not in dataset.fields:
        raise UnknownVariable(name)
    return dataset.fields[name], dataset.fill_mask[name]


def format_number(x) -> str:
    """Shortest decimal that round-trips at the value's own float width."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    pos = np.format_float_positional(x, unique=True, trim="-")
    sci = np.format_float_scientific(x, unique=True, trim="-")
    return sci if len(sci) < len(pos) else pos


def convert_to_csv(dataset: GridDataset, variables: Optional[list] = None) -> str:
    """Flatten fields to CSV: header time,lat,lon,<vars>, rows time-major.

    Masked cells emit an empty field.
    """
    if variables is None:
        variables = list(dataset.fields)
    for name in variables:
        if name not in dataset.fields:
            raise UnknownVariable(name)
    lines = ["time,lat,lon," + ",".join(variables)]
    arrs = [dataset.fields[n] for n in variables]
    masks = [dataset.fill_mask[n] for n in variables]
    for ti, t in enumerate(dataset.times):
        t_txt = format_number(t)
        for li, lat in enumerate(dataset.lats):
            lat_txt = format_number(lat)
            for oi, lon in enumerate(dataset.lons):
                cells = [t_txt, lat_txt, format_number(lon)]
                for arr, mask in zip(arrs, masks):
                    cells.append("" if mask[ti, li, oi] else format_number(arr[ti, li, oi]))
                lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def dataset_from_csv(text: str, epoch: date = UNIX_EPOCH, source: str = "csv") -> GridDataset:
    """Rebuild a GridDataset from CSV in the convert_to_csv layout.

    Axes are the sorted unique coordinates seen in the rows; values parse at
    full float64 text precision; absent fields stay masked.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise EmptyInput("empty CSV")
    header = lines[0].split(",")
    if header[:3] != ["time", "lat", "lon"] or len(header) < 4:
        raise MalformedHeader(f"unexpected CSV header {lines[0]!r}")
    var_names = header[3:]
    rows = []
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != len(header):
            raise MalformedHeader(f"CSV row has {len(cells)} fields, expected {len(header)}")
        rows.append(cells)
    if not rows:
        raise EmptyInput("CSV has no data rows")

    times = np.array(sorted({float(r[0]) for r in rows}))
    lats = np.array(sorted({float(r[1]) for r in rows}))
    lons = np.array(sorted({float(r[2]) for r in rows}))
    t_idx = {v: i for i, v in enumerate(times)}
    la_idx = {v: i for i, v in enumerate(lats)}
    lo_idx = {v: i for i, v in enumerate(lons)}

    shape = (len(times), len(lats), len(lons))
    fields = {n: np.zeros(shape, dtype=np.float64) for n in var_names}
    masks = {n: np.ones(shape, dtype=bool) for n in var_names}
    for r in rows:
        ti, li, oi = t_idx[float(r[0])], la_idx[float(r[1])], lo_idx[float(r[2])]
        for vi, name in enumerate(var_names):
            cell = r[3 + vi]
            if cell != "":
                fields[name][ti, li, oi] = float(cell)
                masks[name][ti, li, oi] = False
    kinds = {n: classify_kind(n) for n in var_names}
    return GridDataset(lats=lats, lons=lons, times=times, epoch=epoch,
                       fields=fields, fill_mask=masks, kinds=kinds, source=source)
