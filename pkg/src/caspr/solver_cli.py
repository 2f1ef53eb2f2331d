"""caspr-solver: standalone ASP solver speaking a clingo-compatible protocol.

Reads a program from stdin (or files), prints Answer/Optimization blocks and a
final SATISFIABLE / UNSATISFIABLE / OPTIMUM FOUND status line.  Exit codes
follow the clingo convention (10 sat, 20 unsat, 30 optimum, 65 on errors).
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .grounding import GroundingError
from .parser import ParseError, parse_program
from .search import OPTIMUM, SAT, SearchTimeout, UNSAT, solve_program


def _parse_args(argv):
    ap = argparse.ArgumentParser(prog="caspr-solver", add_help=True)
    ap.add_argument("--opt-mode", default="opt", choices=["opt", "optN"])
    ap.add_argument("--quiet", default=None, help="accepted for compatibility; ignored")
    ap.add_argument("--version", action="store_true")
    ap.add_argument("rest", nargs="*", help="input files and/or a model count (0 = all)")
    return ap.parse_args(argv)


def main(argv=None) -> int:
    args = _parse_args(argv if argv is not None else sys.argv[1:])
    out = sys.stdout
    print(f"caspr-solver version {__version__}", file=out)
    if args.version:
        return 0

    model_limit = 0
    files = []
    for item in args.rest:
        if item.isdigit():
            model_limit = int(item)
        else:
            files.append(item)

    if files:
        text = "".join(open(f).read() for f in files)
        print(f"Reading from {' '.join(files)}", file=out)
    else:
        text = sys.stdin.read()
        print("Reading from stdin", file=out)

    try:
        program = parse_program(text, allow_reserved=True)
    except ParseError as exc:
        print(f"*** ERROR: {exc}", file=sys.stderr)
        return 65

    print("Solving...", file=out)
    enumerate_all = args.opt_mode == "optN"
    try:
        result = solve_program(
            program, enumerate_all=enumerate_all, model_limit=model_limit
        )
    except (GroundingError, RecursionError) as exc:
        print(f"*** ERROR: {exc}", file=sys.stderr)
        return 65
    except SearchTimeout:
        print("UNKNOWN", file=out)
        return 1

    n = 0
    for model in result.models:
        n += 1
        print(f"Answer: {n}", file=out)
        print(" ".join(sorted(str(a) for a in model)), file=out)
        if result.cost is not None:
            values = " ".join(str(result.cost[l]) for l in sorted(result.cost, reverse=True))
            print(f"Optimization: {values}", file=out)

    print(result.status, file=out)
    print(file=out)
    print(f"Models       : {n}", file=out)
    if result.status == UNSAT:
        return 20
    return 30 if result.status == OPTIMUM else 10


if __name__ == "__main__":
    sys.exit(main())
