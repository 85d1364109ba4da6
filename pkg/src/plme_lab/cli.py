"""Command-line experiment runner.

    plme-lab run <config.yaml> [--seed N] [--threads N] [--out DIR]
    plme-lab validate <config.yaml>
    plme-lab scenarios

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
The config file is YAML; command-line flags override file values.  The
environment variable PLME_CACHE_DIR relocates the ensemble cache.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import yaml

from . import scenarios
from .channel import SingularMapError
from .plme import QuadratureError, R4ConvergenceError
from .evolve import PropagationError
from .scenarios import ConfigError, ExperimentConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _load_config(path: str, args) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError([f"config file: {exc}"]) from exc
    except yaml.YAMLError as exc:
        raise ConfigError([f"config file is not valid YAML: {exc}"]) from exc
    if not isinstance(raw, dict):
        raise ConfigError(["config file must hold a mapping of settings"])
    if getattr(args, "seed", None) is not None:
        raw["seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        raw["threads"] = args.threads
    if getattr(args, "out", None) is not None:
        raw["output_dir"] = args.out
    return ExperimentConfig.from_dict(raw)


def _cmd_run(args) -> int:
    config = _load_config(args.config, args)
    paths = scenarios.run(config)
    for p in paths:
        print(p)
    return EXIT_OK


def _cmd_validate(args) -> int:
    config = _load_config(args.config, args)
    report = scenarios.validate(config)
    print(json.dumps(report, indent=2, sort_keys=True, default=str))
    return EXIT_OK if report["ok"] else EXIT_CONFIG


def _cmd_scenarios(_args) -> int:
    for entry in scenarios.list_scenarios():
        print(f"{entry['name']}: {entry['description']}")
        defaults = {k: v for k, v in entry["defaults"].items() if v is not None}
        print(f"    defaults: {json.dumps(defaults, sort_keys=True)}")
        if entry["params"]:
            print(f"    params:   {json.dumps(entry['params'], sort_keys=True)}")
        if entry["needs_seed"]:
            print("    requires: --seed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plme-lab",
                                     description="Driven-qubit noise experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario from a config file")
    run_p.add_argument("config")
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--threads", type=int, default=None)
    run_p.add_argument("--out", default=None)
    run_p.set_defaults(func=_cmd_run)

    val_p = sub.add_parser("validate", help="check a config file")
    val_p.add_argument("config")
    val_p.add_argument("--seed", type=int, default=None)
    val_p.set_defaults(func=_cmd_validate)

    sc_p = sub.add_parser("scenarios", help="list scenarios and their defaults")
    sc_p.set_defaults(func=_cmd_scenarios)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, R4ConvergenceError, PropagationError, SingularMapError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
