"""Command-line front end.

Four batch pipelines over CSV files: simulate a record, demodulate a
record into an impedance series, calibrate the fixture from pairwise
measurements, and extract spectral features.  No interactive state; the
same config file drives all commands, any key can be overridden with
--set.  Exit codes: 0 ok, 2 validation, 3 numeric failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import calibration as cal
from . import demod as dm
from . import features as ft
from . import io as aio
from . import simulator as sim
from .errors import BridgeError, NotConverged

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def _add_common(p: argparse.ArgumentParser, with_plot=True):
    p.add_argument("--config", metavar="PATH", help="run configuration file")
    p.add_argument("--seed", type=int, metavar="N", help="override the RNG seed")
    p.add_argument("--out", metavar="PATH", required=True, help="output CSV path")
    p.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any config key (repeatable)",
    )
    if with_plot:
        p.add_argument(
            "--plot",
            action="store_true",
            help="render a PNG figure next to the CSV output",
        )


def _parse_overrides(pairs):
    out = {}
    for item in pairs:
        if "=" not in item:
            raise aio.ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _load_config(args) -> aio.RunConfig:
    cfg = aio.load_run_config(args.config, _parse_overrides(args.overrides))
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.sim = replace(cfg.sim, seed=args.seed)
    return cfg


def _plot_path(out_path: str) -> str:
    stem = out_path[:-4] if out_path.lower().endswith(".csv") else out_path
    return stem + ".png"


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    rec = sim.simulate(cfg.sim)
    aio.write_waveform_csv(args.out, rec)
    print(f"wrote {len(rec)} samples to {args.out}")
    if args.plot:
        from . import plots

        plots.waveform_figure(rec, _plot_path(args.out))
        print(f"wrote {_plot_path(args.out)}")
    return EXIT_OK


def cmd_demod(args) -> int:
    cfg = _load_config(args)
    rec = aio.read_waveform_csv(args.infile)
    # the record's sample grid must satisfy the demodulation constraints
    if rec.f_s <= 2 * cfg.demod.f_gen:
        raise aio.ConfigError(
            f"record rate {rec.f_s:g} Hz does not resolve the {cfg.demod.f_gen:g} Hz carrier"
        )
    try:
        cfg.demod.resolve_n_window(rec.f_s)
    except ValueError as exc:
        raise aio.ConfigError(f"record rate incompatible with demod config: {exc}") from exc
    ratios = dm.demodulate(rec, cfg.demod)
    series = dm.ratio_to_impedance(ratios, cfg.bridge, cfg.correction)
    aio.write_impedance_csv(args.out, series)
    print(f"wrote {len(series)} impedance samples to {args.out}")
    if args.plot:
        from . import plots

        plots.impedance_figure(series, _plot_path(args.out))
        print(f"wrote {_plot_path(args.out)}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = _load_config(args)
    merged: dict = {}
    for path in args.measurements:
        for pair, z in aio.read_measurements_csv(path).items():
            merged[pair] = z
    missing = sorted(set(cal.ALL_PAIRS) - set(merged))
    if missing:
        tags = ", ".join(f"{a}{b}" for a, b in missing)
        print(f"error: missing measurement for pair(s): {tags}", file=sys.stderr)
        return EXIT_VALIDATION
    meas = cal.CalibrationMeasurements(z_meas=merged, f=cfg.calibration_f)
    stem = args.out[:-4] if args.out.lower().endswith(".csv") else args.out
    report_path = args.report or (stem + ".report.csv")
    try:
        edges, report = cal.solve_network(meas)
    except NotConverged as exc:
        aio.write_edges_csv(args.out, exc.edges)
        aio.write_report_csv(report_path, exc.report)
        print(f"error: {exc}; best iterate persisted to {args.out}", file=sys.stderr)
        return EXIT_NUMERIC
    aio.write_edges_csv(args.out, edges)
    aio.write_report_csv(report_path, report)
    print(
        f"converged in {report.iterations} iterations, "
        f"residual {report.residual_norm:.3g}; wrote {args.out} and {report_path}"
    )
    return EXIT_OK


def cmd_features(args) -> int:
    cfg = _load_config(args)
    series = aio.read_impedance_csv(args.infile)
    if len(series) < cfg.features.length:
        raise aio.ConfigError(
            f"series has {len(series)} samples, feature window needs {cfg.features.length}"
        )
    dt = float(series.timestamps[1] - series.timestamps[0])
    f_rate = 1.0 / dt
    channels = ft.channel_split(series)
    t0 = float(series.timestamps[0])
    features = {
        key: ft.central_frequency(x, cfg.features, f_rate, t0=t0, channel=key)
        for key, x in channels.items()
    }
    aio.write_feature_csv(args.out, features)
    print(f"wrote {len(features['re'].values)} feature windows to {args.out}")
    if args.plot:
        from . import plots

        plots.features_figure(features, _plot_path(args.out))
        print(f"wrote {_plot_path(args.out)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="acbridge",
        description="AC bridge impedance measurement pipelines",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("simulate", help="synthesise a two-channel waveform CSV")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("demod", help="demodulate a waveform CSV into impedances")
    p.add_argument("infile", metavar="WAVEFORM_CSV")
    _add_common(p)
    p.set_defaults(func=cmd_demod)

    p = subs.add_parser("calibrate", help="solve fixture edges from pairwise measurements")
    p.add_argument("measurements", nargs="+", metavar="MEASUREMENT_CSV")
    p.add_argument("--report", metavar="PATH", help="solver report CSV (default: <out>.report.csv)")
    _add_common(p, with_plot=False)
    p.set_defaults(func=cmd_calibrate)

    p = subs.add_parser("features", help="extract spectral features from an impedance CSV")
    p.add_argument("infile", metavar="IMPEDANCE_CSV")
    _add_common(p)
    p.set_defaults(func=cmd_features)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except aio.CsvFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (aio.ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except BridgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
