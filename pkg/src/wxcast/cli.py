"""One binary driving the pipeline: convert, ingest, cluster, forecast,
route, render, serve.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
Data goes to stdout (JSON lines or CSV), diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import date

from . import cluster, forecast, ncgrid, render, router
from .errors import NoData, WxError
from .router import WeatherWeights
from .store import GeoPoint, Store

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the CLI contract wants 1
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _coord(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    return value


def _latlon(text):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected lat,lon — got {text!r}")
    try:
        return GeoPoint(float(parts[0]), float(parts[1]))
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _date(text):
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected ISO date, got {text!r}")


def _point_args(p):
    p.add_argument("--lat", type=_coord, required=True)
    p.add_argument("--lon", type=_coord, required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wxcast", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("convert", help="NetCDF classic file to CSV")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--vars", help="comma-separated variable names (default: all)")

    p = sub.add_parser("ingest", help="publish a dataset into a snapshot store")
    p.add_argument("input", help=".nc or .csv file")
    p.add_argument("--store", required=True, help="snapshot store directory")

    p = sub.add_parser("cluster", help="k-means over grid-cell climate features")
    p.add_argument("--store", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", help="write model JSON here instead of stdout")
    p.add_argument("--pretty", action="store_true")

    p = sub.add_parser("forecast", help="forecast one point/date/variable")
    p.add_argument("--store", required=True)
    _point_args(p)
    p.add_argument("--date", type=_date, required=True)
    p.add_argument("--var", required=True, choices=["temperature", "pressure", "rainfall"])
    p.add_argument("--pretty", action="store_true")

    p = sub.add_parser("route", help="weather-weighted best path")
    p.add_argument("--from", dest="origin", type=_latlon, required=True,
                   metavar="LAT,LON")
    p.add_argument("--to", dest="dest", type=_latlon, required=True, metavar="LAT,LON")
    p.add_argument("--depart", type=_date, required=True)
    p.add_argument("--graph", required=True, help="GeoJSON road network")
    p.add_argument("--store", help="snapshot store directory (for weather)")
    p.add_argument("--rain-penalty", type=float, default=0.5)
    p.add_argument("--p-ref", type=float, default=5.0)
    p.add_argument("--rain-cap", type=float, default=4.0)
    p.add_argument("--snow-penalty", type=float, default=2.0)
    p.add_argument("--t-snow", type=float, default=0.0)
    p.add_argument("--pretty", action="store_true")

    p = sub.add_parser("render", help="rasterize a forecast grid to PPM")
    p.add_argument("--store", required=True)
    p.add_argument("--var", required=True, choices=["temperature", "pressure", "rainfall"])
    p.add_argument("--date", type=_date, required=True)
    p.add_argument("--out", required=True, help="output .ppm path")
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float)
    p.add_argument("--palette", choices=sorted(render.PALETTES), default=None)
    p.add_argument("--scale", type=int, default=8)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", required=True, help="ApiConfig JSON file")

    return parser


def _emit(doc, pretty=False, out=None):
    text = json.dumps(doc, indent=2 if pretty else None, sort_keys=False)
    if out:
        with open(out, "w") as f:
            f.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _load_dataset(path):
    if path.endswith(".csv"):
        with open(path) as f:
            return ncgrid.dataset_from_csv(f.read(), source=os.path.basename(path))
    with open(path, "rb") as f:
        return ncgrid.parse_classic(f.read(), source=os.path.basename(path))


def cmd_convert(args):
    ds = _load_dataset(args.input)
    names = args.vars.split(",") if args.vars else None
    csv = ncgrid.convert_to_csv(ds, names)
    with open(args.output, "w") as f:
        f.write(csv)
    return EXIT_OK


def cmd_ingest(args):
    ds = _load_dataset(args.input)
    store = Store(args.store)
    snapshot = store.current().ingest(ds, source=os.path.basename(args.input))
    store.publish(snapshot)
    _emit({"version": snapshot.version,
           "grid": list(snapshot.grid_shape),
           "variables": snapshot.variables()})
    return EXIT_OK


def cmd_cluster(args):
    snapshot = Store(args.store).current()
    features = cluster.build_features(snapshot)
    model = cluster.kmeans_fit(features, args.k, seed=args.seed)
    _emit(model.to_dict(), pretty=args.pretty, out=args.out)
    return EXIT_OK


def cmd_forecast(args):
    snapshot = Store(args.store).current()
    report = forecast.forecast_at(snapshot, GeoPoint(args.lat, args.lon),
                                  args.date, args.var)
    _emit(report.to_dict(), pretty=args.pretty)
    return EXIT_OK


def cmd_route(args):
    with open(args.graph) as f:
        graph = router.load_geojson(f.read())
    weights = WeatherWeights(rain_penalty=args.rain_penalty, p_ref_mm=args.p_ref,
                             rain_cap=args.rain_cap, snow_penalty=args.snow_penalty,
                             t_snow_c=args.t_snow)
    snapshot = Store(args.store).current() if args.store else None
    result = router.best_path(graph, args.origin, args.dest, args.depart,
                              snapshot, weights)
    _emit(result.to_dict(graph), pretty=args.pretty)
    return EXIT_OK


def cmd_render(args):
    snapshot = Store(args.store).current()
    values, mask = forecast.grid_forecast(snapshot, args.var, args.date)
    if mask.all():
        raise NoData(f"no {args.var} data to render")
    if (args.lo is None) != (args.hi is None):
        sys.stderr.write("render: --lo and --hi must be given together\n")
        return EXIT_USAGE
    if args.lo is not None:
        lo, hi = args.lo, args.hi
    else:
        lo, hi = render.field_range(values, mask)
    pal_name = args.palette or ("rain" if args.var == "rainfall" else "thermal")
    palette = render.PALETTES[pal_name]
    lat_ascending = bool(len(snapshot.lats) < 2 or snapshot.lats[1] > snapshot.lats[0])
    img = render.render_field(values, mask, lo, hi, palette, scale=args.scale,
                              lat_ascending=lat_ascending)
    with open(args.out, "wb") as f:
        f.write(render.encode_ppm(img))
    meta = render.sidecar(args.var, args.date.isoformat(), lo, hi, palette,
                          snapshot.grid_shape)
    with open(args.out + ".json", "w") as f:
        json.dump(meta, f, indent=1)
        f.write("\n")
    return EXIT_OK


def cmd_serve(args):
    from .service import ApiConfig, serve_forever

    config = ApiConfig.from_file(args.config)
    serve_forever(config)
    return EXIT_OK


COMMANDS = {
    "convert": cmd_convert,
    "ingest": cmd_ingest,
    "cluster": cmd_cluster,
    "forecast": cmd_forecast,
    "route": cmd_route,
    "render": cmd_render,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except WxError as e:
        sys.stderr.write(json.dumps({"error": e.code, "message": str(e)}) + "\n")
        return EXIT_DATA
    except FileNotFoundError as e:
        sys.stderr.write(json.dumps({"error": "file_not_found", "message": str(e)}) + "\n")
        return EXIT_DATA
    except SystemExit:
        raise
    except Exception as e:  # noqa: BLE001 - the contract maps these to exit 3
        sys.stderr.write(json.dumps({"error": "internal", "message": str(e)}) + "\n")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
