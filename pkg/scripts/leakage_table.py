"""Compare simulated leakage against the perturbative prediction for one scenario.

    python3 scripts/leakage_table.py scenarios/fig3a.yaml
"""
import sys

import numpy as np

from ringup import runner
from ringup.config import load_config


def main(path: str) -> None:
    ctx = runner.Context(load_config(path))
    res = runner.analysis_leakage(ctx)
    for k, v in res.summary.items():
        print(f"{k:>20s}  {v:.4e}" if isinstance(v, float) else f"{k:>20s}  {v}")
    tab = next(iter(res.tables.values()))
    t = tab["t_ns"]
    step = max(1, len(t) // 20)
    cols = [c for c in tab if c != "t_ns"]
    print("\n" + "t_ns".rjust(8) + "".join(c.rjust(14) for c in cols))
    for i in range(0, len(t), step):
        print(f"{t[i]:8.2f}" + "".join(f"{np.real(tab[c][i]):14.4e}" for c in cols))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "scenarios/fig3a.yaml")
