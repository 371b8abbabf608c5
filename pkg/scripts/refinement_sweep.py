"""Volume bracket of the L0 combination across grid levels, with and without
the normal-fan directions.  Prints CSV on stdout.

    python scripts/refinement_sweep.py --K cube --L '{kind:"named", name:"cross-polytope", volume:8}'
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from dataclasses import dataclass

from logbm.geometry import volume
from logbm.l0 import GridTooCoarseError, bracket_log_eps, direction_grid, l0_combination, volume_bounds
from logbm.specfmt import load_body

LEVELS = {2: (45, 90, 180, 360, 720, 1440), 3: (1, 2, 3, 4, 5, 6), 4: (8, 10, 12, 14)}


@dataclass
class Config:
    K: str = "cube"
    L: str = '{kind:"named", name:"cross-polytope", n:3, volume:8}'
    lam: float = 0.5


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--K", default=Config.K)
    p.add_argument("--L", default=Config.L)
    p.add_argument("--lam", type=float, default=Config.lam)
    a = p.parse_args(argv)
    K, L = load_body(a.K).body, load_body(a.L).body
    target = (1 - a.lam) * math.log(volume(K)) + a.lam * math.log(volume(L))

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["grid", "fan", "delta", "directions", "lower", "upper", "log_eps", "margin", "seconds"])
    for level in LEVELS[K.dim]:
        g = direction_grid(K.dim, level)
        for fan in (True, False):
            t0 = time.perf_counter()
            try:
                wf = l0_combination(K, L, a.lam, g, fan=fan)
            except GridTooCoarseError:
                w.writerow([g.label, fan, f"{g.delta:.6g}", len(g.directions), "", "", "", "too-coarse", ""])
                continue
            lo, up = volume_bounds(wf)
            w.writerow([wf.grid.label, fan, f"{g.delta:.6g}", len(wf.grid.directions), f"{lo:.12g}", f"{up:.12g}",
                        f"{bracket_log_eps(wf):.3g}", f"{math.log(lo) - target:.12g}",
                        f"{time.perf_counter() - t0:.2f}"])


if __name__ == "__main__":
    main()
