"""Command-line front end.

    jumphedge run <config.json> [--threads N] [--out DIR] [--seed S]
                  [--dump-paths K]
    jumphedge validate <config.json>

Exit codes: 0 success, 2 configuration error, 3 numerical step-budget error.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from .config import load_config
from .errors import ConfigError, StepBudgetError
from .studies import run_study, write_outputs


def _build_parser():
    parser = argparse.ArgumentParser(prog="jumphedge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the experiment described by a config file")
    run_p.add_argument("config", help="path to the JSON experiment config")
    run_p.add_argument("--threads", type=int, default=1,
                       help="worker process cap (does not affect output bytes)")
    run_p.add_argument("--out", default=None, help="output directory override")
    run_p.add_argument("--seed", type=int, default=None, help="master seed override")
    run_p.add_argument("--dump-paths", type=int, default=0, metavar="K",
                       help="dump the first K simulated paths as CSV for debugging")

    val_p = sub.add_parser("validate", help="check a config file and exit")
    val_p.add_argument("config", help="path to the JSON experiment config")
    return parser


def _dump_paths(config, out_dir, k):
    path_dir = os.path.join(out_dir, "paths")
    os.makedirs(path_dir, exist_ok=True)
    engine = config.engine()
    for i in range(k):
        bundle = engine.simulate(i)
        with open(os.path.join(path_dir, f"path_{i:05d}.csv"), "w",
                  encoding="utf-8", newline="\n") as fh:
            bundle.write_csv(fh)


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        print(f"ok: {args.config} is a valid {config.kind} config")
        return 0

    if args.seed is not None:
        config = dataclasses.replace(config, master_seed=args.seed)
    out_dir = args.out if args.out is not None else config.out_dir
    try:
        result = run_study(config, threads=max(1, args.threads))
        written = write_outputs(result, config, out_dir)
        if args.dump_paths > 0:
            _dump_paths(config, out_dir, args.dump_paths)
    except StepBudgetError as exc:
        print(f"numerical budget error: {exc}", file=sys.stderr)
        return 3
    for path in written:
        print(path)
    print(f"done in {result.runtime_s:.1f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
