"""Command line entry point: ``fairmac run | oracle | scenarios``."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import ConfigError, list_presets, load_config, preset_path
from .experiment import run_experiment, segment_optima

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _cmd_run(args) -> int:
    config = load_config(args.config)
    if args.seeds:
        config.seeds = tuple(args.seeds)
    if args.raw:
        config.raw = True
    if args.workers:
        config.workers = args.workers
    result = run_experiment(config, output_dir=args.output)
    print(f"wrote {len(result.traces)} trace(s) to {result.output_dir}")
    print("scheduler       segment  phi_star    utility     gap")
    for row in result.summary:
        if row.seed == "mean":
            print(f"{row.scheduler:<15} {row.segment:>7}  {row.phi_star:.6f}  {row.final_utility:.6f}  {row.gap:+.6f}")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    config = load_config(args.config)
    np.set_printoptions(precision=6, suppress=True)
    for k, ((start, _), opt) in enumerate(zip(config.schedule.segments, segment_optima(config))):
        print(f"segment {k + 1} (from slot {start})")
        print(f"  phi* = {opt.phi_star:.9g}")
        print(f"  gamma* = {opt.gamma}")
        print("  P* =")
        for row in opt.P:
            print("    " + " ".join(f"{x:.6f}" for x in row))
    return EXIT_OK


def _cmd_scenarios(args) -> int:
    if args.action == "list":
        for name in list_presets():
            first = preset_path(name).read_text(encoding="utf-8").splitlines()[0]
            print(f"{name:<12} {first.lstrip('# ').strip()}")
    else:
        print(preset_path(args.name).read_text(encoding="utf-8"), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fairmac", description="Fair multi-channel access scheduling simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate every scheduler and seed of a config")
    r.add_argument("config", help="config file, or a shipped preset such as scenario1")
    r.add_argument("-o", "--output", help="output directory (overrides config and $FAIRMAC_OUTPUT_DIR)")
    r.add_argument("--seeds", type=int, nargs="+", help="override the config's seeds")
    r.add_argument("--raw", action="store_true", help="write every slot instead of every stride-th")
    r.add_argument("--workers", type=int, help="number of worker processes")
    r.set_defaults(func=_cmd_run)

    o = sub.add_parser("oracle", help="print phi*, P* and gamma* of each segment")
    o.add_argument("config")
    o.set_defaults(func=_cmd_oracle)

    s = sub.add_parser("scenarios", help="shipped scenario presets")
    s_sub = s.add_subparsers(dest="action", required=True)
    s_sub.add_parser("list", help="list presets")
    show = s_sub.add_parser("show", help="print a preset config")
    show.add_argument("name")
    s.set_defaults(func=_cmd_scenarios)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
