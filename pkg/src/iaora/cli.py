"""Command-line entry point: validate configs and run experiments.

Usage:
    iaora run --config experiment.cfg [--output results.csv] [--seed 7] [--workers 4]
    iaora validate --config experiment.cfg

Exit status is 0 on success and nonzero with a diagnostic on stderr otherwise.
"""

import argparse
import sys

from .experiments import ConfigError, run_experiment, validate_config


def _load_config(path: str):
    try:
        with open(path) as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return validate_config(raw)


def _cmd_validate(args) -> int:
    config = _load_config(args.config)
    print(f"config OK: experiment={config.experiment}, output={config.output_path}")
    return 0


def _cmd_run(args) -> int:
    config = _load_config(args.config)
    if args.output is not None:
        config.output_path = args.output
    if args.seed is not None:
        config.seed = args.seed
    _, summary = run_experiment(config, workers=args.workers)
    sys.stdout.write(summary)
    print(f"results written to {config.output_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iaora",
        description="Multi-cell opportunistic random access: experiment runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment described by a config file")
    run_p.add_argument("--config", required=True, help="path to a key=value config file")
    run_p.add_argument("--output", default=None, help="override the CSV output path")
    run_p.add_argument("--seed", type=int, default=None, help="override the master seed")
    run_p.add_argument("--workers", type=int, default=1, help="parallel simulation workers")
    run_p.set_defaults(func=_cmd_run)

    val_p = sub.add_parser("validate", help="check a config file without running it")
    val_p.add_argument("--config", required=True, help="path to a key=value config file")
    val_p.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
