"""Command-line entry point: ``odc run|bounds|validate|layers``."""

from __future__ import annotations

import argparse
import sys

from . import harness
from .network import DisconnectedNode, read_topology_csv


def _cmd_run(args) -> int:
    config = harness.load_config(args.config)
    result = harness.run_experiment(config)
    out = config.output_path() / config.name
    if result.summary:
        for row in result.summary:
            print(f"{row['policy']:>4}  mean VoI {row['mean_total_voi']:.3f}  "
                  f"efficiency {row['energy_efficiency']:.5f}  regret {row['mean_regret']:.3f}")
        if {"coa", "odc", "sdc"} <= set(config.policies):
            print(f"ordering coa > odc > sdc in {result.ordering_count()}/{config.trials} trials")
    for row in result.density:
        print("  ".join(f"{k}={v:.3f}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))
    print(f"results written to {out}")
    return 0


def _cmd_bounds(args) -> int:
    for label, value in harness.bound_table(args.delta, args.cmax, args.cmin, args.eprime,
                                            args.horizon, args.best_mean):
        print(f"{label}\t{value:.6f}")
    return 0


def _cmd_validate(args) -> int:
    records = harness.load_trace(args.trace)
    sunny = sum(r.harvest_ma >= args.threshold for r in records)
    print(f"ok: {len(records)} slots, {sunny} at or above {args.threshold:g} mA")
    return 0


def _cmd_layers(args) -> int:
    topo = read_topology_csv(args.topology, args.radius, args.sink)
    for k, layer in enumerate(topo.layers):
        print(f"layer {k}: {' '.join(map(str, layer))}")
    if args.out:
        topo.to_csv(args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="odc", description="Duty-cycling simulator for solar sensor nodes.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment from a key = value config file")
    p.add_argument("config")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("bounds", help="evaluate pull-count and regret bounds")
    p.add_argument("--delta", type=float, nargs="+", required=True, help="suboptimality gaps")
    p.add_argument("--cmax", type=float, required=True)
    p.add_argument("--cmin", type=float, required=True)
    p.add_argument("--eprime", type=float, default=2.0)
    p.add_argument("--horizon", type=float, required=True, help="number of sunny slots |P'|")
    p.add_argument("--best-mean", type=float, default=1.0, help="best arm's mean reward per cost")
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("validate", help="check a slot,harvest_ma,lux trace file")
    p.add_argument("trace")
    p.add_argument("--threshold", type=float, default=20.0)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("layers", help="compute hop layers for a node,x,y topology file")
    p.add_argument("topology")
    p.add_argument("--radius", type=float, default=50.0)
    p.add_argument("--sink", type=int, default=0)
    p.add_argument("--out", help="write node,x,y,layer,parent here")
    p.set_defaults(func=_cmd_layers)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (harness.ConfigError, harness.TraceError, DisconnectedNode, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
