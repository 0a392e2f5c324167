"""Command line driver: ``axistokes {converge,nusweep,quadsweep,proptest}``."""
from __future__ import annotations

import argparse
import logging
import math
import sys

from .bench import VARIANTS, RunConfig, format_csv, run_convergence, run_nu_sweep, run_quadrature_sweep
from .properties import run_property_suite


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t)


def _float_list(text: str) -> tuple[float, ...]:
    """Comma list, or a decade range ``1e0..1e-8`` (both ends included)."""
    if ".." in text:
        lo, hi = text.split("..")
        a, b = float(lo), float(hi)
        if a <= 0 or b <= 0:
            raise argparse.ArgumentTypeError("decade ranges need positive ends")
        ea, eb = round(math.log10(a)), round(math.log10(b))
        if 10.0**ea != a or 10.0**eb != b:
            raise argparse.ArgumentTypeError(f"{text!r}: ends of a decade range must be powers of ten")
        step = 1 if eb >= ea else -1
        return tuple(10.0**e for e in range(ea, eb + step, step))
    return tuple(float(t) for t in text.split(",") if t)


def _variants(text: str) -> tuple[str, ...]:
    if text == "all":
        return VARIANTS
    names = tuple(t for t in text.split(",") if t)
    for name in names:
        if name not in VARIANTS:
            raise argparse.ArgumentTypeError(f"unknown variant {name!r}; choose from {', '.join(VARIANTS)} or all")
    return names


def _common(p: argparse.ArgumentParser, case: str, pi: str) -> None:
    p.add_argument("--case", default=case, choices=("ex1", "ex2", "ex3"))
    p.add_argument("--pi", type=_variants, default=_variants(pi), help="variant, comma list, or 'all'")
    p.add_argument("--jitter", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--qorder-a", type=int, default=4)
    p.add_argument("--qorder-rhs", type=int, default=10)
    p.add_argument("--qorder-err", type=int, default=10)
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="axistokes", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("converge", help="convergence study over mesh levels")
    _common(p, "ex2", "bdm1_axi")
    p.add_argument("--nu", type=_float_list, default=(1e-3,))
    p.add_argument("--levels", type=_int_list, default=(4, 8, 16, 32, 64))

    p = sub.add_parser("nusweep", help="viscosity sweep on a fixed mesh")
    _common(p, "ex2", "all")
    p.add_argument("--nus", type=_float_list, default=_float_list("1e0..1e-8"))
    g = p.add_mutually_exclusive_group()
    g.add_argument("--dofs", type=int, default=22000, help="pick the level with the closest dof count")
    g.add_argument("--level", type=int, default=None)

    p = sub.add_parser("quadsweep", help="viscosity sweep repeated per load quadrature order")
    _common(p, "ex3", "all")
    p.add_argument("--qorders", type=_int_list, default=(10, 20, 50))
    p.add_argument("--nus", type=_float_list, default=_float_list("1e0..1e-8"))
    g = p.add_mutually_exclusive_group()
    g.add_argument("--dofs", type=int, default=22000)
    g.add_argument("--level", type=int, default=None)

    p = sub.add_parser("proptest", help="run the invariant suite")
    p.add_argument("--quick", action="store_true", help="smaller meshes and fewer samples")
    return parser


def _config(args, nus, levels) -> RunConfig:
    return RunConfig(
        case=args.case,
        variants=args.pi,
        nus=nus,
        levels=levels,
        jitter=args.jitter,
        seed=args.seed,
        qorder_a=args.qorder_a,
        qorder_rhs=args.qorder_rhs,
        qorder_err=args.qorder_err,
        out=args.out,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    if args.command == "proptest":
        results = run_property_suite(quick=args.quick)
        return 0 if all(r.passed for r in results) else 1

    if args.command == "converge":
        rows = run_convergence(_config(args, args.nu, args.levels))
    elif args.command == "nusweep":
        if args.level is not None:
            rows = run_nu_sweep(_config(args, args.nus, (args.level,)))
        else:
            rows = run_nu_sweep(_config(args, args.nus, (1,)), dofs=args.dofs)
    else:
        levels = (args.level,) if args.level is not None else (1,)
        dofs = None if args.level is not None else args.dofs
        rows = run_quadrature_sweep(_config(args, args.nus, levels), qorders=args.qorders, dofs=dofs)

    if args.out is None:
        sys.stdout.write(format_csv(rows))
    return 0


if __name__ == "__main__":
    sys.exit(main())
