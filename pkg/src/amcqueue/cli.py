"""Command line entry point.

Exit status: 0 all invariants held, 1 configuration error, 2 numerical
failure, 3 verification z-score failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from amcqueue.bmap import arrival_count_matrices
from amcqueue.chain import QueueChainSpec, build_transition_matrix
from amcqueue.config import PRESETS, load_config, with_simulation
from amcqueue.errors import AmcQueueError, ConfigError
from amcqueue.sweep import (
    analytic_csv,
    metadata_json,
    point_model,
    run_sweep,
    simulated_csv,
    verification_csv,
    verify,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3

log = logging.getLogger("amcqueue")


def _emit(text: str, path, meta: str | None = None):
    if path is None:
        sys.stdout.write(text)
        return
    path = Path(path)
    path.write_text(text)
    if meta is not None:
        path.with_name(path.name + ".meta.json").write_text(meta)
    log.info("wrote %s", path)


def _cmd_analyze(cfg, args):
    result = run_sweep(cfg)
    _emit(analytic_csv(result), args.output or cfg.output, metadata_json(result))
    return EXIT_OK if result.ok else EXIT_NUMERIC


def _cmd_simulate(cfg, args):
    if cfg.simulation is None:
        cfg = with_simulation(cfg)
    result = run_sweep(cfg, simulate=True, seed=args.seed)
    _emit(simulated_csv(result), args.output or cfg.output, metadata_json(result))
    return EXIT_OK if result.ok else EXIT_NUMERIC


def _cmd_verify(cfg, args):
    if cfg.simulation is None:
        raise ConfigError("simulation: verify needs a simulation block", field="simulation")
    result = verify(cfg, seed=args.seed)
    _emit(verification_csv(result), args.output or cfg.output, metadata_json(result))
    if not result.ok:
        return EXIT_NUMERIC
    if any(not p.comparison.ok for p in result.points):
        return EXIT_VERIFY
    return EXIT_OK


def _cmd_dump(cfg, args):
    values = sorted(cfg.sweep_values, key=lambda v: -1 if v is None else v)
    if not 0 <= args.point < len(values):
        raise ConfigError(f"--point: sweep has {len(values)} points", field="point")
    bmap, tx, channel = point_model(cfg, values[args.point])
    spec = QueueChainSpec(cfg.X, arrival_count_matrices(bmap, cfg.er), tx, channel, cfg.table)
    tm = build_transition_matrix(spec)
    out = args.output or cfg.output
    if out is None:
        coo = tm.M.tocoo()
        for r, c, v in sorted(zip(coo.row, coo.col, coo.data)):
            sys.stdout.write(f"{r} {c} {v:.17g}\n")
    else:
        tm.dump_triplets(out)
    return EXIT_OK


COMMANDS = {
    "analyze": _cmd_analyze,
    "simulate": _cmd_simulate,
    "verify": _cmd_verify,
    "dump-matrix": _cmd_dump,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amcqueue", description="BMAP/AMC finite-buffer queue analysis and simulation"
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="YAML experiment file (may be empty)")
        p.add_argument("--output", "-o", help="output path (default: config 'output' or stdout)")
        p.add_argument("--preset", choices=sorted(PRESETS), help="base configuration")
        if name in ("simulate", "verify"):
            p.add_argument("--seed", type=int, help="override simulation.seed")
        if name == "dump-matrix":
            p.add_argument("--point", type=int, default=0, help="sweep point index (ascending order)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, args.preset)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AmcQueueError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
