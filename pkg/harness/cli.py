from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from config.settings import LAB_LOG_LEVEL, LAB_OUTPUT_DIR, LAB_WORKERS
from harness.report import emit_report, load_records, write_sweep
from harness.runner import run_experiment
from harness.schemas import load_config, load_sweep_config
from harness.sweep import sweep
from mdp.errors import ConfigError, LabError

logger = logging.getLogger(__name__)


def _cmd_run(args: argparse.Namespace) -> dict:
    config = load_config(args.config)
    out_dir = Path(args.out or config.output_dir or LAB_OUTPUT_DIR)
    seeds = [args.seed] if args.seed is not None else config.seeds
    records = [run_experiment(config, seed) for seed in seeds]
    paths = emit_report(records, out_dir, "json") + emit_report(records, out_dir, "csv")
    paths += emit_report(records, out_dir, "svg")
    return {
        "status": "ok",
        "runs": [{"seed": r.seed, "learner": r.learner, "final_regret": r.final_regret} for r in records],
        "files": [str(p) for p in paths],
    }


def _cmd_sweep(args: argparse.Namespace) -> dict:
    sweep_config = load_sweep_config(args.config)
    out_dir = Path(args.out or sweep_config.base.output_dir or LAB_OUTPUT_DIR)
    cells, rows = sweep(sweep_config, workers=args.workers)
    paths = write_sweep(cells, rows, out_dir)
    return {
        "status": "ok",
        "cells": len(cells),
        "errors": sum(1 for c in cells if c.is_error),
        "files": [str(p) for p in paths],
    }


def _cmd_report(args: argparse.Namespace) -> dict:
    records = load_records(args.in_dir)
    if not records:
        raise ConfigError(f"no run records found in {args.in_dir}")
    paths = emit_report(records, args.out or args.in_dir, args.format, log_log=not args.linear)
    return {"status": "ok", "files": [str(p) for p in paths]}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="harness", description="Delayed-feedback adversarial MDP experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run one experiment config (every seed, or --seed).")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", default=None, help="Output directory (default: LAB_OUTPUT_DIR).")
    run.set_defaults(handler=_cmd_run)

    sw = sub.add_parser("sweep", help="Run a grid of configs and seeds.")
    sw.add_argument("--config", required=True)
    sw.add_argument("--out", default=None)
    sw.add_argument("--workers", type=int, default=None, help=f"Parallel cells (default: LAB_WORKERS={LAB_WORKERS}).")
    sw.set_defaults(handler=_cmd_sweep)

    rep = sub.add_parser("report", help="Render stored run records.")
    rep.add_argument("--in", dest="in_dir", required=True)
    rep.add_argument("--format", choices=["csv", "json", "svg", "svg_lines", "html"], default="svg")
    rep.add_argument("--out", default=None)
    rep.add_argument("--linear", action="store_true", help="Linear axes instead of log-log.")
    rep.set_defaults(handler=_cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=LAB_LOG_LEVEL, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        result = args.handler(args)
    except LabError as exc:
        print(json.dumps({"status": "error", "error": type(exc).__name__, "detail": str(exc)}))
        return 2 if isinstance(exc, ConfigError) else 1
    except Exception as exc:
        logger.exception("unexpected failure")
        print(json.dumps({"status": "error", "error": type(exc).__name__, "detail": str(exc)}))
        return 1
    print(json.dumps(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
