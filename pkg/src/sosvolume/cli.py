"""``volume`` command line.

    volume run --scenario disk --degree 16 --variant stokes-general [--side moment]
               [--out results.csv] [--dump-grid 201 [--grid-out grid.csv]]
               [--mc-samples N --seed S]
    volume table --id T1 [--max-degree 8] [--out t1.csv] [--workers 4]
    volume check [--samples N]
    volume list

Exit status is 0 only when every requested solve ends Optimal or NearOptimal
(for ``check``: when every check passes).
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import bench
from .assembly import Variant
from .scenario import registry
from .solver import SolverOptions

VARIANTS = [v.value for v in Variant]


def _opts(args) -> SolverOptions:
    return SolverOptions(tol_gap=args.tol, tol_feas=args.tol, max_iters=args.max_iters,
                         verbosity=1 if args.verbose > 1 else 0)


def cmd_run(args) -> int:
    row, cert = bench.solve_scenario(args.scenario, args.degree, args.variant, _opts(args), args.side,
                                     args.mc_samples, args.seed)
    text = bench.write_results([row], args.out)
    sys.stdout.write(text)
    if args.dump_grid is not None:
        if cert is None:
            print(f"no certificate to dump (status {row.status})", file=sys.stderr)
        else:
            dump = bench.dump_w_grid(cert, args.scenario, args.dump_grid, args.mc_samples or 1_000_000, args.seed)
            path = args.grid_out or f"{args.scenario}-d{args.degree}-{row.variant}-grid.csv"
            bench.write_grid(dump, path)
            print(f"grid: {path} ({len(dump)} rows) L1(w, w*)={bench.grid_l1(dump):.6g} "
                  f"max w={bench.grid_max(dump):.6g} max w outside K={bench.exterior_overshoot(dump):.6g}",
                  file=sys.stderr)
    return 0 if row.ok else 1


def cmd_table(args) -> int:
    rows = bench.reproduce_table(args.id, max_degree=args.max_degree, opts=_opts(args), side=args.side,
                                 workers=args.workers)
    sys.stdout.write(bench.write_results(rows, args.out))
    return 0 if all(r.ok for r in rows) else 1


def cmd_check(args) -> int:
    ok = True
    for name, passed, detail in bench.consistency_checks(args.samples):
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    return 0 if ok else 1


def cmd_list(args) -> int:
    for name, s in sorted(registry().items()):
        vol = "?" if s.exact_volume is None else f"{s.exact_volume:.10g} ({s.exact_expr})"
        print(f"{name:12s} n={s.n} deg g={s.g.degree()} volume={vol}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="volume", description="Moment-SOS volume bounds with Stokes constraints")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def solver_args(sp):
        sp.add_argument("--side", choices=["sos", "moment"], default="sos")
        sp.add_argument("--tol", type=float, default=1e-8)
        sp.add_argument("--max-iters", type=int, default=200)

    r = sub.add_parser("run", help="solve one (scenario, degree, variant) cell")
    r.add_argument("--scenario", required=True, choices=sorted(registry()))
    r.add_argument("--degree", type=int, required=True)
    r.add_argument("--variant", choices=VARIANTS, default="plain")
    r.add_argument("--out", help="write the result row to this CSV file")
    r.add_argument("--dump-grid", type=int, metavar="R", help="dump w, w* and 1_K on an R^n grid (n <= 2)")
    r.add_argument("--grid-out", help="grid CSV path (default derived from the cell)")
    r.add_argument("--mc-samples", type=int, default=1_000_000)
    r.add_argument("--seed", type=int, default=0)
    solver_args(r)
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("table", help="reproduce a reference table")
    t.add_argument("--id", required=True, choices=["T1", "T3"])
    t.add_argument("--max-degree", type=int)
    t.add_argument("--out")
    t.add_argument("--workers", type=int, default=1)
    solver_args(t)
    t.set_defaults(func=cmd_table)

    c = sub.add_parser("check", help="containment and moment-consistency checks")
    c.add_argument("--samples", type=int, default=1_000_000)
    c.set_defaults(func=cmd_check)

    ls = sub.add_parser("list", help="list registered scenarios")
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (bench.TableLimitError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
