"""Command line entry point: ``basinlab run | presets | validate``."""

from __future__ import annotations

import argparse
import logging
import sys

from basinlab.config import ANALYSES, check_seed, load_config
from basinlab.errors import ConfigError, ConstructionError
from basinlab.skew.core import PRESETS, build_system

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONSTRUCTION = 3
EXIT_INCONCLUSIVE = 4


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="basinlab", description="Skew products, random walks along "
                                "orbits and intermingled basins: seeded experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log construction checks")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the analysis named in a config file")
    r.add_argument("config")
    r.add_argument("--seed", help="override the config seed (64-bit unsigned)")
    r.add_argument("--out", help="output directory (default: [run] output or ./out)")
    sub.add_parser("presets", help="list presets with their parameter schemas")
    v = sub.add_parser("validate", help="run the construction checks of a config only")
    v.add_argument("config")
    return p


def _presets() -> int:
    for name, spec in PRESETS.items():
        print(f"{name}  ({spec.summary})")
        print(f"    base axis: {spec.base_axis}; fiber dimension: {spec.fiber_dim}")
        for key, val in spec.defaults.items():
            print(f"    {key} = {val}  [{type(val).__name__}]")
    print("analyses: " + ", ".join(ANALYSES))
    return EXIT_OK


def _validate(path: str) -> int:
    try:
        cfg = load_config(path, check_construction=False)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        system = build_system(cfg.preset, cfg.params, cfg.seed)
    except ConstructionError as exc:
        print(f"construction failed: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    print(system.render_checks())
    print(f"{cfg.preset}: all construction checks pass")
    return EXIT_OK


def _run(args) -> int:
    from basinlab.runner import run

    try:
        cfg = load_config(args.config, check_construction=False)
        if args.seed is not None:
            cfg = cfg.with_seed(check_seed(args.seed))
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        manifest = run(cfg, args.out)
    except ConstructionError as exc:
        print(f"construction failed: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1
    for name, digest in manifest.outputs.items():
        print(f"{digest}  {name}")
    print(f"status: {manifest.status}")
    return EXIT_INCONCLUSIVE if manifest.status == "inconclusive" else EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "presets":
        return _presets()
    if args.command == "validate":
        return _validate(args.config)
    return _run(args)


if __name__ == "__main__":
    sys.exit(main())
