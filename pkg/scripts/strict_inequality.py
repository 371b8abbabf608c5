"""Certified log-Brunn-Minkowski margin for the cube against the volume-matched
cross-polytope in R^3 across lambda, written as a report.

    python scripts/strict_inequality.py --out cube_cross.csv
"""
from __future__ import annotations

import argparse

from logbm.cli import run


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--lambdas", default="0.1,0.25,0.5,0.75,0.9")
    p.add_argument("--grid-level", default="icosahedral-5")
    p.add_argument("--out", default=None)
    p.add_argument("--no-fan", action="store_true")
    a = p.parse_args(argv)
    argv = ["verify-logbm", "cube", '{kind:"named", name:"cross-polytope", n:3, volume:8}',
            "--lambda", a.lambdas, "--grid-level", a.grid_level, "--format", "csv"]
    if a.no_fan:
        argv.append("--no-fan")
    if a.out:
        argv += ["--out", a.out]
    code, _ = run(argv)
    raise SystemExit(code)


if __name__ == "__main__":
    main()
