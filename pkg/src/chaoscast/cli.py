"""Command line entry point: ``chaoscast {generate,train,evaluate,forecast,pipeline}``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from . import harness
from .config import SCALES, SYSTEM_PRESETS, ExperimentConfig, preset
from .errors import ChaoscastError

log = logging.getLogger("chaoscast")

COMMANDS = {
    "generate": lambda cfg, args: harness.cmd_generate(cfg),
    "train": lambda cfg, args: harness.cmd_train(cfg),
    "evaluate": lambda cfg, args: harness.cmd_evaluate(cfg),
    "forecast": lambda cfg, args: harness.cmd_forecast(cfg, args.threads),
    "pipeline": lambda cfg, args: harness.cmd_pipeline(cfg, args.threads),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config JSON (overrides --preset/--scale)")
    common.add_argument("--preset", default="mackey-glass", choices=sorted(SYSTEM_PRESETS))
    common.add_argument("--scale", default="paper", choices=list(SCALES))
    common.add_argument("--seed", type=int, help="global seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, default=None, help="forecast worker threads (default: all cores)")
    common.add_argument("--noise-ratio", type=float, help="observation noise as a fraction of sd[y]")
    common.add_argument("--start-index", type=int, help="first test sample of the forecast window")
    common.add_argument("--epochs", type=int)
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="chaoscast", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def resolve_config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.load(args.config)
    else:
        cfg = preset(args.preset, args.scale, seed=args.seed or 0)
    if args.seed is not None:
        cfg = cfg.replace(
            seed=args.seed,
            training=dataclasses.replace(cfg.training, seed=args.seed),
            forecast=dataclasses.replace(cfg.forecast, seed=args.seed),
        )
    if args.out:
        cfg = cfg.replace(out_dir=args.out)
    if args.noise_ratio is not None:
        cfg = cfg.replace(system=dataclasses.replace(cfg.system, noise_ratio=args.noise_ratio))
    if args.start_index is not None:
        cfg = cfg.replace(start_index=args.start_index)
    if args.epochs is not None:
        cfg = cfg.replace(training=dataclasses.replace(cfg.training, epochs=args.epochs))
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(message)s",
    )
    try:
        if args.threads is not None and args.threads < 1:
            raise ChaoscastError("--threads must be >= 1")
        cfg = resolve_config(args)
        COMMANDS[args.command](cfg, args)
    except (ChaoscastError, OSError, ValueError, KeyError) as e:
        print(f"chaoscast {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
