"""Command-line interface: simulate / preset / topology subcommands."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import graph, harness

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="coordtrack",
        description="Deterministic simulator for decentralized dynamic-average "
                    "tracking algorithms.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one experiment config")
    sim.add_argument("--config", required=True, help="JSON config path")
    sim.add_argument("--algorithm", help="override the config's algorithm")
    sim.add_argument("--agents", type=int, help="override the agent count")
    sim.add_argument("--dim", type=int, help="override the signal dimension")
    sim.add_argument("--iters", type=int, help="override the iteration count")
    sim.add_argument("--seed", type=int, help="override the run seed")
    sim.add_argument("--output", help="output directory (default: config value or .)")

    pre = sub.add_parser("preset", help="run a bundled comparison suite")
    pre.add_argument("name", choices=harness.PRESETS)
    pre.add_argument("--output", required=True, help="output directory")
    pre.add_argument("--iters", type=int,
                     help="truncate every curve to this many iterations")

    topo = sub.add_parser("topology", help="generate or inspect topologies")
    tsub = topo.add_subparsers(dest="topo_command", required=True)

    gen = tsub.add_parser("gen", help="generate a topology JSON file")
    gen.add_argument("--kind", required=True,
                     choices=("cycle", "complete", "geometric"))
    gen.add_argument("--agents", type=int, required=True)
    gen.add_argument("--radius", type=float,
                     help="connection radius (geometric only)")
    gen.add_argument("--seed", type=int, default=0,
                     help="placement seed (geometric only)")
    gen.add_argument("--output", help="output file (default: stdout)")

    ins = tsub.add_parser("inspect", help="summarize a topology JSON file")
    ins.add_argument("path")
    return parser


def _apply_overrides(cfg, args):
    if args.algorithm is not None:
        cfg.algorithm = args.algorithm
    if args.agents is not None:
        cfg.topology = dict(cfg.topology, num_agents=args.agents)
    if args.dim is not None:
        cfg.signal = dict(cfg.signal, dimension=args.dim)
    if args.iters is not None:
        cfg.iterations = args.iters
    if args.seed is not None:
        cfg.seed = args.seed
    # revalidate after overrides
    return harness.ExperimentConfig(**cfg.__dict__)


def _cmd_simulate(args):
    cfg = harness.load_config(args.config)
    cfg = _apply_overrides(cfg, args)
    csv_path, summary_path, summary = harness.run_experiment(cfg, args.output)
    print(f"wrote {csv_path} and {summary_path}")
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _cmd_preset(args):
    manifest_path, manifest = harness.run_comparison_suite(
        args.name, args.output, iterations=args.iters)
    print(f"wrote {manifest_path}")
    print(json.dumps(manifest, indent=2))
    return EXIT_OK


def _cmd_topology_gen(args):
    if args.kind == "cycle":
        topo = graph.build_cycle(args.agents)
    elif args.kind == "complete":
        topo = graph.build_complete(args.agents)
    else:
        if args.radius is None:
            raise ValueError("geometric topology needs --radius")
        topo = graph.build_connected_geometric(args.agents, args.radius, args.seed)
    text = topo.to_json()
    if args.output:
        Path(args.output).write_text(text + "\n")
        print(f"wrote {args.output}")
    else:
        print(text)
    return EXIT_OK


def _cmd_topology_inspect(args):
    topo = graph.Topology.from_json(Path(args.path).read_text())
    degrees = [topo.degree(k) for k in range(topo.num_agents)]
    info = {
        "num_agents": topo.num_agents,
        "num_edges": len(topo.edges),
        "connected": topo.is_connected(),
        "min_degree": min(degrees),
        "max_degree": max(degrees),
    }
    if info["connected"]:
        A = graph.metropolis_weights(topo)
        info["second_eigenvalue_magnitude"] = graph.second_eigenvalue_magnitude(A)
    print(json.dumps(info, indent=2))
    return EXIT_OK


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "preset":
            return _cmd_preset(args)
        if args.command == "topology":
            if args.topo_command == "gen":
                return _cmd_topology_gen(args)
            return _cmd_topology_inspect(args)
        raise AssertionError("unreachable")
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
