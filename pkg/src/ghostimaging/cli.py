"""Command-line front end: ``ghostimaging <subcommand> --config scenario.json --out dir``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import (
    ConfigError,
    GhostImagingError,
    GridMismatch,
    InsufficientSamples,
    InvalidParams,
    NonclassicalState,
)
from .runner import compare, load_config, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_REGIME = 3
EXIT_IO = 4

_INPUT_ERRORS = (ConfigError, InvalidParams, GridMismatch, NonclassicalState, InsufficientSamples)


def _scenario_parser(sub, name, help_text):
    p = sub.add_parser(name, help=help_text)
    p.add_argument("--config", required=True, type=Path, help="scenario JSON file")
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--seed", type=int, help="override montecarlo.seed")
    p.add_argument("--grid", type=int, help="override grid.n_points")
    p.add_argument("--format", choices=("csv", "pgm"), help="also write a 2D graymap with 'pgm'")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ghostimaging", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    image = _scenario_parser(sub, "image", "ghost image scan (closed form or numeric propagation)")
    image.add_argument("--method", choices=("analytic", "numeric"), help="default: the scenario's mode, else analytic")
    _scenario_parser(sub, "propagate", "propagate source kernels to the detection plane")
    _scenario_parser(sub, "contrast", "image plus closed-form contrast report")
    _scenario_parser(sub, "relay", "ghost image through a thin-lens relay")
    _scenario_parser(sub, "construct", "classical modal realization of prescribed kernels")
    _scenario_parser(sub, "montecarlo", "sampled fields and photocurrents")
    cmp = sub.add_parser("compare", help="compare two run directories")
    cmp.add_argument("run_a", type=Path)
    cmp.add_argument("run_b", type=Path)
    cmp.add_argument("--out", type=Path, help="directory for comparison.json (default: print only)")
    return parser


def _apply_overrides(cfg: dict, args) -> dict:
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("montecarlo.seed", "must be non-negative")
        cfg["montecarlo"]["seed"] = args.seed
    if args.grid is not None:
        if args.grid < 8:
            raise ConfigError("grid.n_points", "must be at least 8")
        cfg["grid"]["n_points"] = args.grid
    if args.format is not None:
        cfg["output"]["format"] = args.format
    return cfg


def _mode_for(args, cfg) -> str:
    if args.command == "image":
        if args.method:
            return args.method
        return cfg["mode"] if cfg["mode"] in ("analytic", "numeric") else "analytic"
    return args.command


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "compare":
            report = compare(args.run_a, args.run_b)
            text = json.dumps(report, indent=2, sort_keys=True)
            if args.out is not None:
                args.out.mkdir(parents=True, exist_ok=True)
                (args.out / "comparison.json").write_text(text + "\n")
            print(text)
            return EXIT_OK
        cfg = _apply_overrides(load_config(args.config), args)
        manifest = run(cfg, args.out, _mode_for(args, cfg))
        print(f"wrote {', '.join(manifest['files'])} to {args.out}")
        return EXIT_OK
    except _INPUT_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GhostImagingError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
