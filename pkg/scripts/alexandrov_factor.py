"""Richardson-extrapolated d/dt V(K +_0 t.L) at t=0 against I1 and I1/n.

On the dilation family L = cK the slope is n V(K) log c, which pins the
normalisation of the variational formula.

    python scripts/alexandrov_factor.py --factor 2 --bodies cube hexagon2d diamond2d
"""
from __future__ import annotations

import argparse
import math
from dataclasses import dataclass

from logbm.geometry import scale, volume
from logbm.l0 import alexandrov_derivative
from logbm.specfmt import load_body


@dataclass
class Config:
    bodies: tuple = ("cube", "hexagon2d", "diamond2d")
    factor: float = 2.0
    t_steps: tuple = (1e-2, 5e-3, 2.5e-3)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--bodies", nargs="+", default=list(Config.bodies))
    p.add_argument("--factor", type=float, default=Config.factor)
    p.add_argument("--t", type=float, nargs="+", default=list(Config.t_steps))
    a = p.parse_args(argv)
    cfg = Config(tuple(a.bodies), a.factor, tuple(a.t))

    print(f"{'body':>12} {'n':>2} {'slope':>14} {'I1':>14} {'I1/n':>14} {'rel(I1)':>10} {'rel(I1/n)':>10}")
    for spec in cfg.bodies:
        K = load_body(spec).body
        r = alexandrov_derivative(K, scale(K, cfg.factor), t_steps=cfg.t_steps)
        expect = K.dim * volume(K) * math.log(cfg.factor)
        assert abs(r.I1 - expect) <= 1e-10 * abs(expect)
        rel1 = abs(r.extrapolated - r.I1) / abs(r.I1)
        rel2 = abs(r.extrapolated - r.I2) / abs(r.I2)
        print(f"{spec:>12} {K.dim:>2} {r.extrapolated:14.8f} {r.I1:14.8f} {r.I2:14.8f} {rel1:10.2e} {rel2:10.2e}")
        print(" " * 16 + "raw slopes: " + ", ".join(f"{s:.8f}" for s in r.slopes))


if __name__ == "__main__":
    main()
