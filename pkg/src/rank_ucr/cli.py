"""``rank-ucr`` command line: run, validate and theory subcommands."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time

from .harness import ConfigError, ExperimentConfig, RunError, run_experiment, theory_report, write_csv

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("rank_ucr")


def _load(path) -> ExperimentConfig:
    cfg = ExperimentConfig.load(path)
    for w in cfg.warnings():
        log.warning(w)
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args.config)
    output = args.output or cfg.output
    start = time.perf_counter()
    curves = run_experiment(cfg, threads=args.threads)
    raw, agg = write_csv(curves, output)
    log.info("%d curves in %.1fs -> %s, %s", len(curves), time.perf_counter() - start, raw, agg)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load(args.config)
    print(json.dumps({"valid": True, "warnings": cfg.warnings()}, indent=2))
    return EXIT_OK


def cmd_theory(args) -> int:
    cfg = _load(args.config)
    print(json.dumps(theory_report(cfg), indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rank-ucr", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="execute an experiment and write CSVs")
    r.add_argument("--config", required=True)
    r.add_argument("--output", help="override the config's output prefix")
    r.add_argument("--threads", type=int, help=f"worker processes (default: $RANK_UCR_THREADS or all cores)")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="check a config and report warnings")
    v.add_argument("--config", required=True)
    v.set_defaults(func=cmd_validate)

    t = sub.add_parser("theory", help="print theoretical xi and the T0 lower bound")
    t.add_argument("--config", required=True)
    t.set_defaults(func=cmd_theory)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as e:
        log.error("config error: %s", e)
        return EXIT_CONFIG
    except (RunError, OSError, ArithmeticError, RuntimeError, ValueError) as e:
        log.error("runtime error: %s", e)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
