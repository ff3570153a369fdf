"""Command-line front end.

    ddr-divdiv check --element cube --degree 1 --json
    ddr-divdiv solve --cube 4 --degree 0 --out run.csv
    ddr-divdiv convergence --family cube --degrees 0..1 --sizes 2,4,8 --out conv.csv
    ddr-divdiv gen-mesh --cube 3 --out cube3.json
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import biharmonic as bh
from .mesh import build_cartesian_mesh, read_mesh, write_mesh

log = logging.getLogger("ddrdivdiv")


class UsageError(Exception):
    pass


def _degree_range(text: str) -> list:
    try:
        if ".." in text:
            lo, hi = (int(p) for p in text.split("..", 1))
        else:
            lo = hi = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad degree range {text!r}") from None
    if lo < 0 or hi < lo:
        raise argparse.ArgumentTypeError(f"bad degree range {text!r}")
    return list(range(lo, hi + 1))


def _size_list(text: str) -> list:
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from None
    if not sizes or min(sizes) < 1:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}")
    return sizes


def _nonneg(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def _positive(text: str) -> int:
    value = _nonneg(text)
    if value == 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    common.add_argument("--threads", type=_positive, default=1, help="worker threads for local assembly")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ddr-divdiv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common], help="verify the local complex on one element")
    p.add_argument("--element", choices=("cube", "tet", "hex", "voronoi", "file"), default="cube")
    p.add_argument("--mesh", type=Path, help="mesh file for --element file")
    p.add_argument("--degree", type=_nonneg, default=1)
    p.add_argument("--trials", type=_positive, default=20)
    p.add_argument("--json", action="store_true", help="print the report as JSON")

    p = sub.add_parser("solve", parents=[common], help="one biharmonic solve")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--mesh", type=Path)
    src.add_argument("--cube", type=_positive)
    p.add_argument("--degree", type=_nonneg, default=0)
    p.add_argument("--case", default="paper-bubble", choices=("paper-bubble",))
    p.add_argument("--out", type=Path)

    p = sub.add_parser("convergence", parents=[common], help="errors over a mesh family")
    p.add_argument("--family", default="cube",
                   help="'cube' or a comma-separated list of mesh files")
    p.add_argument("--degrees", type=_degree_range, default=[0, 1])
    p.add_argument("--sizes", type=_size_list, default=[2, 4, 8])
    p.add_argument("--case", default="paper-bubble", choices=("paper-bubble",))
    p.add_argument("--out", type=Path)

    p = sub.add_parser("gen-mesh", parents=[common], help="write a cartesian mesh file")
    p.add_argument("--cube", type=_positive, required=True)
    p.add_argument("--out", type=Path, required=True)
    return parser


# subcommands ------------------------------------------------------------------------------
def cmd_check(args) -> int:
    from .verify.suite import element_mesh, failed_checks, run_suite

    if args.element == "file" and args.mesh is None:
        raise UsageError("--element file needs --mesh")
    mesh = element_mesh(args.element, args.mesh)
    report = run_suite(mesh, args.degree, seed=args.seed, trials=args.trials)
    failed = failed_checks(report)
    if args.json:
        payload = {"element": args.element, "k": args.degree, "seed": args.seed,
                   "checks": report, "passed": not failed}
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for name, entry in report.items():
            print(f"{name:12s} {'pass' if entry['passed'] else 'FAIL'}")
        for note in report["exactness"]["notes"]:
            print(f"note: {note}")
    if failed:
        print(f"failed check: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


def cmd_solve(args) -> int:
    mesh = read_mesh(args.mesh) if args.mesh else build_cartesian_mesh(args.cube)
    case = bh.manufactured_case(args.case)
    try:
        row = bh.run_case(mesh, args.degree, case, args.threads)
    except bh.SingularSystemError as exc:
        print(f"failed check: solve ({exc})", file=sys.stderr)
        return 1
    print(" ".join(f"{key}={row[key]:.6g}" for key in ("h", "ndof", "err_sigma", "err_u",
                                                         "err_total", "residual")))
    if args.out:
        bh.write_csv([row], args.out)
    if row["residual"] > 1e-8:
        print(f"failed check: residual {row['residual']:.3e}", file=sys.stderr)
        return 1
    return 0


def _family(args) -> tuple:
    if args.family == "cube":
        return "cube", [build_cartesian_mesh(n) for n in args.sizes]
    paths = [Path(p) for p in args.family.split(",") if p.strip()]
    missing = [str(p) for p in paths if not p.is_file()]
    if missing:
        raise UsageError(f"mesh files not found: {', '.join(missing)}")
    return "file", [read_mesh(p) for p in paths]


def cmd_convergence(args) -> int:
    name, meshes = _family(args)
    study = bh.convergence_study(meshes, args.degrees, args.case, args.threads)
    rows = []
    for k, entry in study.items():
        slope = entry["slope"]
        print(f"k={k} slope={'' if slope is None else f'{slope:.3f}'}")
        for r in entry["rows"]:
            print(f"  h={r['h']:.4f} ndof={r['ndof']} err_total={r['err_total']:.4e}")
        rows += entry["rows"]
        if args.out:
            out = Path(args.out)
            bh.write_csv(entry["rows"], out.with_name(f"{out.stem}_{name}_k{k}{out.suffix or '.csv'}"))
    if args.out:
        bh.write_csv(rows, args.out)
    return 0


def cmd_gen_mesh(args) -> int:
    write_mesh(build_cartesian_mesh(args.cube), args.out)
    return 0


COMMANDS = {"check": cmd_check, "solve": cmd_solve, "convergence": cmd_convergence,
            "gen-mesh": cmd_gen_mesh}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"ddr-divdiv: error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
