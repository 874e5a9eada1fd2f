"""Command-line entry point: ``fedsyn <command> [--config FILE] [--seed N] [--out DIR]``.

Precedence, highest first: command-line flags, the JSON config file,
built-in defaults. ``FEDSYN_LOG`` (error, info, debug) sets log verbosity.

Exit status is 0 when every output was written, 1 when a run fails and 2
for usage or configuration errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

from . import experiment
from .exceptions import ConfigError, FedSynError

log = logging.getLogger("fedsyn")

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedsyn", description="Federated GAN synthesis simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON experiment configuration")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--out", help="output directory (overrides the config)")
        return p

    add("train-central", "train the pooled baseline GAN")
    add("train-federated", "run noisy federated averaging over non-IID clients")
    p = add("sweep-lambda", "score the federated generator for each client noise scale")
    p.add_argument("--baseline", help="baseline checkpoint (default: <out>/central.fsyn)")
    p = add("gen-samples", "export samples from a checkpoint")
    p.add_argument("--checkpoint", help="checkpoint to sample (default: <out>/central.fsyn)")
    p.add_argument("--n", type=int, help="number of samples")
    return parser


def resolve_config(args) -> experiment.ExperimentConfig:
    cfg = experiment.load_config(args.config) if args.config else experiment.ExperimentConfig().validate()
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError(f"--seed must be non-negative, got {args.seed}")
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, out=args.out)
    return cfg


def configure_logging():
    name = os.environ.get("FEDSYN_LOG", "error").strip().lower()
    if name not in LOG_LEVELS:
        raise ConfigError(f"FEDSYN_LOG must be one of {', '.join(LOG_LEVELS)}, got {name!r}")
    logging.basicConfig(level=LOG_LEVELS[name], format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr, force=True)


def run(args) -> list:
    cfg = resolve_config(args)
    if args.command == "train-central":
        return experiment.cmd_train_central(cfg)
    if args.command == "train-federated":
        return experiment.cmd_train_federated(cfg)
    if args.command == "sweep-lambda":
        return experiment.cmd_sweep_lambda(cfg, baseline=args.baseline)
    return experiment.cmd_gen_samples(cfg, checkpoint=args.checkpoint, n=args.n)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        configure_logging()
        written = run(args)
    except ConfigError as exc:
        print(f"fedsyn: configuration error: {exc}", file=sys.stderr)
        return 2
    except (FedSynError, OSError) as exc:
        print(f"fedsyn: {args.command} failed: {exc}", file=sys.stderr)
        return 1
    for path in written:
        log.info("wrote %s", path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
