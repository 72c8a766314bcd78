"""Command-line runner for sweeps, parameter comparisons and channel dumps."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from . import experiments
from .channel import dc_gain, rms_delay_spread
from .config import PRESETS, ExperimentConfig, apply_presets, load_config
from .experiments import (
    ChannelCache,
    ErrorMap,
    ensure_dir,
    run_sweep,
    write_impulse_csv,
    write_points_csv,
    write_summary_csv,
)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML configuration file")
    p.add_argument("--seed", type=int, help="override the master RNG seed")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--preset", action="append", default=[],
                   help=f"apply a named preset (repeatable): {', '.join(PRESETS)}")
    p.add_argument("--no-noise", action="store_true",
                   help="disable receiver noise")


def _build_config(args) -> ExperimentConfig:
    config = load_config(args.config)
    presets = []
    for entry in args.preset:
        presets.extend(s for s in entry.split(",") if s)
    config = apply_presets(config, presets)
    if args.seed is not None:
        config = replace(config, rng_seed=args.seed)
    if args.no_noise:
        config = replace(config, noise=replace(config.noise, enabled=False))
    return config


def _print_summary(s) -> None:
    print(f"modulation={s.modulation} N={s.n_subcarriers} M={s.qam_order} "
          f"power={s.power_dbm} dBm seed={s.seed}")
    print(f"  corner {s.corner_m:.4g} m | edge {s.edge_m:.4g} m | "
          f"center {s.center_m:.4g} m")
    print(f"  rms rect {s.rms_rect_m:.4g} m | rms total {s.rms_total_m:.4g} m")


def cmd_sweep(args) -> int:
    config = _build_config(args)
    out = ensure_dir(args.out)
    error_map = run_sweep(config)
    write_points_csv(error_map, os.path.join(out, "points.csv"))
    write_summary_csv([error_map.summary], os.path.join(out, "summary.csv"))
    print(f"grid {config.grid_nx}x{config.grid_ny}, cp_len={error_map.cp_len} samples")
    _print_summary(error_map.summary)
    return 0


def cmd_compare(args) -> int:
    base = _build_config(args)
    values = [v for entry in args.values.split(",") if (v := entry.strip())]
    configs = []
    for v in values:
        if args.axis == "fftsize":
            cfg = replace(base, ofdm=replace(base.ofdm, n_subcarriers=int(v)))
        elif args.axis == "qam":
            cfg = replace(base, ofdm=replace(base.ofdm, qam_order=int(v)))
        elif args.axis == "power":
            cfg = replace(base, target_power_dbm=float(v))
        else:
            raise ValueError(f"unknown axis {args.axis!r}")
        configs.append(cfg)
    out = ensure_dir(args.out)
    summaries = experiments.compare_runs(configs, ChannelCache())
    write_summary_csv(summaries, os.path.join(out, "compare.csv"))
    for s in summaries:
        _print_summary(s)
    return 0


def cmd_channel(args) -> int:
    config = _build_config(args)
    out = ensure_dir(args.out)
    if args.point:
        pts = [tuple(float(c) for c in entry.split(",")) for entry in args.point]
    else:
        room = config.room
        pts = [(room.length / 2, room.width / 2),  # center
               (room.length / 2, 0.0),             # edge
               (0.0, 0.0)]                         # corner
    cache = ChannelCache()
    for x, y in pts:
        for li, lum in enumerate(config.luminaires):
            ir = cache.get_or_simulate(config, li, x, y)
            name = f"channel_x{x:g}_y{y:g}_lum{lum.id_code}.csv"
            write_impulse_csv(ir, os.path.join(out, name))
            print(f"({x:g}, {y:g}) lum {lum.id_code}: H(0)={dc_gain(ir):.4g}, "
                  f"rms spread={rms_delay_spread(ir) * 1e9:.3f} ns")
    return 0


def cmd_summarize(args) -> int:
    config = _build_config(args)
    points = experiments.read_points_csv(args.points_csv)
    error_map = ErrorMap(points=points, config=config, cp_len=0)
    out = ensure_dir(args.out)
    write_summary_csv([error_map.summary], os.path.join(out, "summary.csv"))
    _print_summary(error_map.summary)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="vlcpos",
        description="Indoor visible-light positioning simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run a positioning error sweep over the grid")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="sweep one parameter axis and compare RMS errors")
    _add_common(p)
    p.add_argument("--axis", required=True, choices=("fftsize", "qam", "power"))
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("channel", help="dump impulse responses to CSV")
    _add_common(p)
    p.add_argument("--point", action="append", default=[],
                   help="receiver location 'x,y' (repeatable); "
                        "default: center, edge and corner")
    p.set_defaults(func=cmd_channel)

    p = sub.add_parser("summarize", help="recompute the summary from a points CSV")
    _add_common(p)
    p.add_argument("--points-csv", required=True)
    p.set_defaults(func=cmd_summarize)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
