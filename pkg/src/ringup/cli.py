"""Command-line entry point: ``ringup {run,sweep,validate,cache}``.

Exit codes: 0 ok, 1 validation, 2 runtime failure, 3 truncation breach.
"""
from __future__ import annotations

import argparse
import logging
import os
import shutil
import sys
from pathlib import Path

from .config import ConfigError, load_config, validate
from .propagate import TruncationError

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_TRUNCATION = 0, 1, 2, 3
DEFAULT_CACHE = Path(os.environ.get("RINGUP_CACHE", Path.home() / ".cache" / "ringup"))

log = logging.getLogger("ringup")


def _values(text: str) -> list[float]:
    vals = [v for v in text.replace(",", " ").split() if v]
    try:
        return [float(v) for v in vals]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"cannot parse values {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ringup", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--cache-dir", type=Path, default=None,
                   help=f"basis cache directory (default: none for run/sweep, {DEFAULT_CACHE} for cache)")
    sub = p.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="simulate a scenario and write CSVs plus a manifest")
    r.add_argument("config", type=Path)
    r.add_argument("--out-dir", default=None)

    s = sub.add_parser("sweep", help="scan one parameter and write an aggregated CSV")
    s.add_argument("config", type=Path)
    s.add_argument("--axis", default=None)
    s.add_argument("--values", type=_values, default=None, help="comma or space separated")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out-dir", default=None)

    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config", type=Path)

    c = sub.add_parser("cache", help="manage the dressed-basis cache")
    c.add_argument("action", choices=("build", "clear"))
    c.add_argument("config", type=Path, nargs="?")
    return p


def _cmd_run(args) -> int:
    from .runner import run

    cfg = load_config(args.config)
    res = run(cfg, cache_dir=args.cache_dir, out_dir=args.out_dir)
    for f in res.files:
        print(f)
    log.info("wall time %.1f s", res.manifest["wall_time_s"])
    return EXIT_OK


def _cmd_sweep(args) -> int:
    from .runner import sweep

    cfg = load_config(args.config)
    axis = args.axis or (cfg.sweep or {}).get("axis")
    values = args.values if args.values is not None else (cfg.sweep or {}).get("values")
    if axis is None:
        raise ConfigError([f"{cfg.source}: no sweep axis given (use --axis or a 'sweep' block)"])
    if not values:
        raise ConfigError([f"{cfg.source}: sweep needs a non-empty value list"])
    print(sweep(cfg, axis, [float(v) for v in values], jobs=args.jobs, cache_dir=args.cache_dir,
                out_dir=args.out_dir))
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    errs = validate(cfg)
    if errs:
        raise ConfigError(errs)
    print(f"{args.config}: ok")
    return EXIT_OK


def _cmd_cache(args) -> int:
    from .runner import tuned_params
    from .spectrum import cached_diagonalize, params_hash

    cache = args.cache_dir or DEFAULT_CACHE
    if args.action == "clear":
        if cache.exists():
            n = len(list(cache.glob("*.basis")))
            shutil.rmtree(cache)
            print(f"removed {n} cached bases from {cache}")
        return EXIT_OK
    if args.config is None:
        raise ConfigError(["cache build needs a config"])
    cfg = load_config(args.config)
    params = tuned_params(cfg)
    cached_diagonalize(params, cache)
    print(f"{cache / (params_hash(params)[:24] + '.basis')}")
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "validate": _cmd_validate, "cache": _cmd_cache}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.verb](args)
    except ConfigError as exc:
        for msg in exc.messages:
            print(f"error: {msg}", file=sys.stderr)
        return EXIT_VALIDATION
    except TruncationError as exc:
        print(f"truncation: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION
    except Exception as exc:  # noqa: BLE001 - map every other failure to the runtime code
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
