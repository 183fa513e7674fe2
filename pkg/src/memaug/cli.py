"""``memaug`` command line: ``run``, ``exact`` and ``reproduce``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import load_json, parse_exact_config, parse_run_config
from .errors import CapacityError, ConfigError, MemaugError
from .figures import FIGURES, reproduce
from .harness import run_exact, run_experiment

OUT_ENV_VAR = "MEMAUG_OUT"
DEFAULT_OUT = "results"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_CAPACITY = 3


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="memaug", description=__doc__)
    parser.add_argument("--out", help=f"output directory (default: ${OUT_ENV_VAR} or ./{DEFAULT_OUT})")
    parser.add_argument("--jobs", type=int, default=1, help="parallel seeds (default 1)")
    parser.add_argument("--seed-offset", type=int, default=0, help="added to every configured seed")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train a learner over the configured seeds")
    run.add_argument("config")
    ex = sub.add_parser("exact", help="run an exact analysis request")
    ex.add_argument("config")
    rep = sub.add_parser("reproduce", help=f"run a bundled figure experiment ({', '.join(FIGURES)})")
    rep.add_argument("figure_id")
    rep.add_argument("--seeds", type=int, default=None, help="number of seeds for learner figures")
    return parser


def output_dir(arg: str | None) -> str:
    return arg or os.environ.get(OUT_ENV_VAR) or DEFAULT_OUT


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = output_dir(args.out)
    try:
        if args.jobs < 1:
            raise ConfigError("must be at least 1", "--jobs")
        if args.seed_offset < 0:
            raise ConfigError("must be non-negative", "--seed-offset")
        if args.command == "run":
            cfg = parse_run_config(load_json(args.config))
            run_experiment(cfg, out, jobs=args.jobs, seed_offset=args.seed_offset)
            print(f"wrote {os.path.join(out, cfg.name)}")
        elif args.command == "exact":
            cfg = parse_exact_config(load_json(args.config))
            run_exact(cfg, out)
            print(f"wrote {os.path.join(out, cfg.name)}")
        else:
            for path in reproduce(args.figure_id, out, seeds=args.seeds, jobs=args.jobs,
                                  seed_offset=args.seed_offset):
                print(f"wrote {path}")
    except ConfigError as exc:
        print(f"memaug: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        print(f"memaug: capacity exceeded: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except MemaugError as exc:
        print(f"memaug: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
