"""Command line entry point.

    lwasim <experiment> [--config PATH] [--out DIR] [--seed U64] [--set key=value ...]
    lwasim --print-default-config <experiment>

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O error.  Failures print one JSON line to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__, config
from .errors import ConfigError, DomainError, InfeasibleError, NumericalError
from .experiments import RUNNERS

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message, "usage")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lwasim", description="Leaky-wave antenna reproduction experiments.")
    p.add_argument("experiment", nargs="?", choices=config.EXPERIMENTS)
    p.add_argument("--config", help="JSON config file (defaults to the built-in config)")
    p.add_argument("--out", help="output directory, overrides output_dir")
    p.add_argument("--seed", type=int, help="64-bit seed, overrides the config seed")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a dotted config path; VALUE is parsed as JSON when possible")
    p.add_argument("--print-default-config", metavar="EXPERIMENT", choices=config.EXPERIMENTS)
    p.add_argument("--version", action="version", version=f"lwasim {__version__}")
    return p


def _report(code: str, message: str, path: str = "", stream=None) -> None:
    line = {"status": "error", "code": code, "path": path, "message": message}
    print(json.dumps(line, sort_keys=True), file=stream or sys.stderr)


def resolve_config(args) -> dict:
    cfg = config.load(args.config) if args.config else config.default_config(args.experiment)
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object", "wrong_type")
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["output_dir"] = args.out
    for item in args.set:
        config.apply_set(cfg, item)
    cfg.setdefault("experiment", args.experiment)
    cfg = config.validate(cfg)
    if cfg["experiment"] != args.experiment:
        raise ConfigError(
            f"config is for {cfg['experiment']!r}, command asked for {args.experiment!r}",
            "experiment_mismatch",
            "experiment",
        )
    return cfg


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.print_default_config:
            print(json.dumps(config.default_config(args.print_default_config), indent=2))
            return EXIT_OK
        if args.experiment is None:
            raise ConfigError("an experiment name is required", "usage")
        cfg = resolve_config(args)
        run = RUNNERS[args.experiment](cfg)
    except ConfigError as exc:
        _report(exc.code, str(exc), exc.path)
        return EXIT_CONFIG
    except DomainError as exc:
        _report("domain_error", str(exc))
        return EXIT_CONFIG
    except (NumericalError, InfeasibleError) as exc:
        _report("numerical_failure", str(exc))
        return EXIT_NUMERIC
    except OSError as exc:
        _report("io_error", str(exc), getattr(exc, "filename", "") or "")
        return EXIT_IO

    if getattr(run, "flagged", False):
        _report("rank_deficient", "zero-forcing needed a regularized inverse on some bins")
        return EXIT_NUMERIC
    result = getattr(run, "result", None)
    if result is not None and result.shortfall:
        _report("peak_shortfall", f"found {result.peaks.size} of {result.assumed_sources} peaks")
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
