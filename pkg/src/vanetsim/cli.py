"""Command line: ``vanetsim simulate | sweep | validate``."""
from __future__ import annotations

import argparse
import sys

from .config import ConfigError, dump_config, load_config
from .engine import Simulation, build_trace
from .harness import AXES, PROTOCOLS, emit_csv, emit_summary, summary_path, sweep
from .metrics import ConsistencyError

EXIT_CONFIG = 2
EXIT_CONSISTENCY = 3


def parse_seeds(text: str) -> list[int]:
    """``1..10`` (inclusive), ``1,4,7`` or a single number."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = (int(p) for p in text.split("..", 1))
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError("seeds", f"expected 'a..b' or a comma list of integers, got {text!r}") from None


def parse_points(text: str, axis: str) -> list:
    try:
        values = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError("points", f"expected a comma list of numbers, got {text!r}") from None
    if not values:
        raise ConfigError("points", "no points given")
    if axis == "density":
        return [int(v) if v == int(v) else v for v in values]
    return values


def parse_protocols(text: str) -> list[str]:
    protos = [p.strip().lower() for p in text.split(",") if p.strip()]
    for p in protos:
        if p not in PROTOCOLS:
            raise ConfigError("protocols", f"unknown protocol {p!r}; choose from {', '.join(PROTOCOLS)}")
    return protos


def cmd_simulate(args) -> int:
    overrides = {}
    if args.protocol:
        overrides["protocol"] = args.protocol.lower()
    if args.seed is not None:
        overrides["seed"] = args.seed
    config = load_config(args.config, **overrides)
    trace = build_trace(config)
    if args.trajectory:
        trace.write_csv(args.trajectory)
    if args.packet_log:
        with open(args.packet_log, "w", newline="") as log:
            metrics = Simulation(config, trace=trace, packet_log=log).run()
    else:
        metrics = Simulation(config, trace=trace).run()
    row = metrics.row()
    emit_csv([row], args.out or sys.stdout)
    return 0


def cmd_sweep(args) -> int:
    base = load_config(args.config)
    points = parse_points(args.points, args.axis)
    result = sweep(base, args.axis, points, parse_protocols(args.protocols), parse_seeds(args.seeds),
                   workers=args.workers)
    emit_csv(result.rows, args.out)
    emit_summary(result, summary_path(args.out))
    for s in result.summary:
        print(f"{args.axis}={s['point']} {s['protocol']}: pdr {s['pdr_mean']:.2f} "
              f"+/- {s['pdr_std']:.2f} over {s['runs']} runs", file=sys.stderr)
    if result.failures:
        print(f"{result.failures} run(s) failed; see the error column", file=sys.stderr)
        return EXIT_CONSISTENCY
    return 0


def cmd_validate(args) -> int:
    config = load_config(args.config)
    sys.stdout.write(dump_config(config))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vanetsim", description="VANET routing simulator (GPSR, DGRP, RDGR)")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one seeded scenario")
    sim.add_argument("--config", help="scenario file (defaults apply when omitted)")
    sim.add_argument("--protocol", choices=PROTOCOLS)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out", help="CSV file for the run row (stdout when omitted)")
    sim.add_argument("--packet-log", help="CSV file for per-packet events")
    sim.add_argument("--trajectory", help="CSV file for the vehicle trace")
    sim.set_defaults(func=cmd_simulate)

    sw = sub.add_parser("sweep", help="run a density or speed sweep")
    sw.add_argument("--config")
    sw.add_argument("--axis", choices=AXES, required=True)
    sw.add_argument("--points", required=True, help="comma list, e.g. 20,40,60,80,100")
    sw.add_argument("--protocols", default=",".join(PROTOCOLS))
    sw.add_argument("--seeds", default="1..10")
    sw.add_argument("--out", required=True)
    sw.add_argument("--workers", type=int, help="parallel runs (default: $VANETSIM_WORKERS or 1)")
    sw.set_defaults(func=cmd_sweep)

    va = sub.add_parser("validate", help="check a scenario file and print the resolved config")
    va.add_argument("--config", required=True)
    va.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConsistencyError as exc:
        print(f"consistency error: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
