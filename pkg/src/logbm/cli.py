"""Command-line entry point: ``logbm <command> K [L] [options]``."""
from __future__ import annotations

import argparse
import sys

from . import harness
from .geometry import GeometryError
from .harness import HarnessConfig, InputError, StageError
from .l0 import GridTooCoarseError
from .measures import MC_SAMPLES, MC_SEED
from .report import EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_INPUT
from .specfmt import SpecError, load_body

TWO_BODY = {
    "verify-logbm": harness.verify_logbm,
    "verify-logm": harness.verify_logm,
    "gaussian-suite": harness.gaussian_suite,
    "uniqueness": harness.uniqueness,
}
ONE_BODY = {
    "detect-sum": harness.detect_sum,
    "symmetrize": harness.symmetrize,
}


def _floats(text: str) -> tuple:
    try:
        vals = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _lambdas(text: str) -> tuple:
    vals = _floats(text)
    if any(not 0.0 <= v <= 1.0 for v in vals):
        raise argparse.ArgumentTypeError("lambda values must lie in [0, 1]")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--lambda", dest="lambdas", type=_lambdas, default=(0.25, 0.5, 0.75),
                        help="comma-separated lambda values (default 0.25,0.5,0.75)")
    common.add_argument("--grid-level", default=None,
                        help="direction grid, e.g. circle-720, icosahedral-5, lattice-12")
    common.add_argument("--seed", type=lambda s: int(s, 0), default=MC_SEED)
    common.add_argument("--mc-samples", type=int, default=MC_SAMPLES)
    common.add_argument("--reflections", default="sign",
                        help="sign | dihedral-<m> | b<n> | {base:sign, conjugate:[[...]]} | {matrices:[...]}")
    common.add_argument("--no-fan", dest="fan", action="store_false",
                        help="do not add the normal-fan directions of K+L (forces the Lipschitz bracket)")
    common.add_argument("--refine", type=int, default=2, help="max grid refinements for inconclusive margins")
    common.add_argument("--normal-samples", type=int, default=2000)
    common.add_argument("--out", default=None, help="report path (default stdout)")
    common.add_argument("--format", choices=("csv", "text"), default="text")

    p = argparse.ArgumentParser(prog="logbm", description="Log-Brunn-Minkowski verification harness")
    sub = p.add_subparsers(dest="command", required=True)
    for name in TWO_BODY:
        s = sub.add_parser(name, parents=[common])
        s.add_argument("K")
        s.add_argument("L")
    for name in ONE_BODY:
        s = sub.add_parser(name, parents=[common])
        s.add_argument("K")
    s = sub.add_parser("equality-suite", parents=[common])
    s.add_argument("K")
    s.add_argument("L", nargs="?")
    s.add_argument("--factors", type=_floats, default=None, help="dilation factor per direct-sum component")
    return p


def config_from_args(a) -> HarnessConfig:
    return HarnessConfig(
        lambdas=a.lambdas, grid_level=a.grid_level, seed=a.seed, mc_samples=a.mc_samples,
        reflections=a.reflections, fan=a.fan, refine=a.refine, normal_samples=a.normal_samples,
        factors=getattr(a, "factors", None),
    )


def run(argv=None) -> tuple[int, str]:
    a = build_parser().parse_args(argv)
    cfg = config_from_args(a)
    K = load_body(a.K)
    inputs = [K.text]
    if a.command in TWO_BODY:
        L = load_body(a.L)
        inputs.append(L.text)
        rep = TWO_BODY[a.command](K.body, L.body, cfg, inputs)
    elif a.command in ONE_BODY:
        rep = ONE_BODY[a.command](K.body, cfg, inputs)
    else:
        L = load_body(a.L) if a.L else None
        if L is not None:
            inputs.append(L.text)
        rep = harness.equality_suite(K, L, cfg, inputs)
    text = rep.render(a.format)
    if a.out:
        with open(a.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return rep.exit_code, text


def main(argv=None) -> int:
    try:
        code, _ = run(argv)
    except (SpecError, InputError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except GridTooCoarseError as e:
        print(f"inconclusive: {e}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except (StageError, GeometryError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAIL
    return code


if __name__ == "__main__":
    sys.exit(main())
