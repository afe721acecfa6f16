"""Run every scenario (and its sweep, if it declares one) and print a summary line each.

    python3 scripts/run_all.py [--only fig2,fig5] [--out-dir results] [--jobs 4]
"""
import argparse
import logging
import time
from pathlib import Path

from ringup import runner
from ringup.config import load_config

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--only", default="", help="comma-separated scenario names")
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    ap.add_argument("--cache-dir", default=None)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    wanted = {s for s in args.only.split(",") if s}
    for path in sorted(SCENARIOS.glob("*.yaml")):
        if wanted and path.stem not in wanted:
            continue
        cfg = load_config(path)
        start = time.perf_counter()
        if cfg.sweep:
            out = runner.sweep(cfg, cfg.sweep["axis"], cfg.sweep["values"], jobs=args.jobs,
                               cache_dir=args.cache_dir, out_dir=args.out_dir)
            logging.info("%-6s sweep -> %s (%.0f s)", cfg.name, out, time.perf_counter() - start)
        else:
            res = runner.run(cfg, cache_dir=args.cache_dir, out_dir=args.out_dir)
            keys = ", ".join(f"{k}={v:.4g}" for k, v in res.summary.items() if isinstance(v, float))
            logging.info("%-6s %s (%.0f s)", cfg.name, keys, time.perf_counter() - start)


if __name__ == "__main__":
    main()
