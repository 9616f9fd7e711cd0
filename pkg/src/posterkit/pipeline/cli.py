"""``posterkit <stage> --config FILE [--seed N] [--workers N] [--replay-dir DIR]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Sequence

from posterkit.errors import ConfigError
from posterkit.pipeline.config import Stage, load_stage_config
from posterkit.pipeline.manifest import ManifestError
from posterkit.pipeline.stages import run_stage

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_HARD_ERRORS = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="posterkit", description="Text-rendering data and evaluation pipeline.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="stage", required=True)
    for stage in Stage:
        cmd = sub.add_parser(stage.value)
        cmd.add_argument("--config", required=True, help="YAML or JSON stage config")
        cmd.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
        cmd.add_argument("--workers", type=int, default=None, help="parallel workers (overrides the config)")
        cmd.add_argument("--replay-dir", default=None, help="serve VLM responses from this capture directory only")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_stage_config(args.config, args.stage, args.seed, args.workers, args.replay_dir)
        report = run_stage(config)
    except (ConfigError, ManifestError) as exc:
        print(f"posterkit {args.stage}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(json.dumps(report.to_json(), sort_keys=True), file=sys.stderr)
    return EXIT_HARD_ERRORS if report.hard_errors else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
