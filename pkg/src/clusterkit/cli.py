"""Command line entry point: ``clusterkit generate|run|sweep|validate``."""

from __future__ import annotations

import argparse
import logging
import os
import subprocess
import sys
from dataclasses import replace
from pathlib import Path

from .experiment import AXES, ConfigError, ExperimentConfig, parse_values, run_one, sweep
from .report import emit_csv, emit_plot, emit_summary_csv, records_to_csv, summarize
from .sim import TopologyError, build_topology, save_topology


def _config(path, args) -> ExperimentConfig:
    config = ExperimentConfig.from_file(path)
    changes = {}
    for name in ("csv", "plot", "trace"):
        value = getattr(args, name, None)
        if value:
            changes[name] = value
    return replace(config, **changes) if changes else config


def cmd_generate(args) -> int:
    config = ExperimentConfig.from_file(args.spec)
    seed = args.seed if args.seed is not None else config.seeds[0]
    topology = build_topology(replace(config.topology, seed=seed))
    save_topology(topology, args.out)
    print(f"{len(topology)} nodes, {topology.edge_count()} edges, "
          f"mean degree {topology.mean_degree():.3f} -> {args.out}")
    return 0


def cmd_run(args) -> int:
    config = _config(args.config, args)
    trace_fh = open(config.trace, "w") if config.trace else None
    records = []
    try:
        for seed in config.seeds:
            sink = None
            if trace_fh is not None:
                trace_fh.write(f"# seed={seed}\n")
                sink = lambda line: trace_fh.write(line + "\n")  # noqa: E731
            record = run_one(config, seed, sink)
            records.append(record)
            print(f"seed={seed} trace_hash={record.trace_hash}", file=sys.stderr)
    finally:
        if trace_fh is not None:
            trace_fh.close()
    _emit(records, config, "node_count")
    return 0


def cmd_sweep(args) -> int:
    config = _config(args.config, args)
    values = parse_values(args.values, args.axis)
    records = sweep(config, args.axis, values, jobs=args.jobs)
    _emit(records, config, args.axis)
    if config.csv:
        emit_summary_csv(summarize(records, args.axis), _summary_path(config.csv))
    return 0


def _summary_path(path: str) -> str:
    p = Path(path)
    return str(p.with_name(p.stem + ".summary" + (p.suffix or ".csv")))


def _emit(records, config, axis) -> None:
    if config.csv:
        emit_csv(records, config.csv)
    else:
        sys.stdout.write(records_to_csv(records))
    if config.plot:
        emit_plot(records, config.plot, axis=axis)


def cmd_validate(args) -> int:
    suite = Path(__file__).resolve().parents[2] / "tests" / "test_acceptance.py"
    if not suite.exists():
        print(f"acceptance suite not found at {suite}", file=sys.stderr)
        return 2
    cmd = [sys.executable, "-m", "pytest", str(suite), "-s", "-q"] + list(args.pytest_args)
    return subprocess.call(cmd, cwd=suite.parent.parent)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clusterkit", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a topology file")
    g.add_argument("--spec", required=True, help="config file with a [topology] section")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="run one configuration for every configured seed")
    r.add_argument("--config", required=True)
    r.add_argument("--csv")
    r.add_argument("--plot")
    r.add_argument("--trace")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="sweep one parameter")
    s.add_argument("--config", required=True)
    s.add_argument("--axis", required=True, choices=AXES)
    s.add_argument("--values", required=True, help="comma separated values")
    s.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    s.add_argument("--csv")
    s.add_argument("--plot")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("validate", help="run the acceptance suite")
    v.add_argument("pytest_args", nargs=argparse.REMAINDER)
    v.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, TopologyError, OSError, ValueError) as exc:
        print(f"clusterkit: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
