"""Command-line interface: solve, optimize, reference, instance generators,
solver probe, and a benchmark harness.

Exit codes: 0 completed (whatever the logical outcome), 10 parse/validation
error, 20 solver/protocol error, 30 timeout/unknown.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import sys
import time

from . import __version__
from .core import QuantifiedProgram, Quantifier
from .engine import Outcome, find_winning_move
from .generators import (
    SplitMix64,
    cc_instance_text,
    gen_qbf,
    qbf_instance_text,
    random_qbf,
)
from .grounding import GroundingError
from .optimize import OptOutcome, solve_lower, solve_upper
from .oracle import OracleError, SolverConfig, SolverSpawnError, probe
from .parser import ParseError, parse_quantified
from . import reference

EXIT_OK = 0
EXIT_INPUT = 10
EXIT_SOLVER = 20
EXIT_UNKNOWN = 30

PARANOID_CAP = 4096


class _InputError(Exception):
    pass


def _config(args) -> SolverConfig:
    return SolverConfig(command=args.solver, timeout=args.timeout)


def _load(path: str) -> QuantifiedProgram:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise _InputError(f"cannot read {path}: {exc}") from exc
    return parse_quantified(text, filename=path)


def _move_list(move) -> list[str]:
    return sorted(str(a) for a in move) if move is not None else []


def _cost_json(cost) -> dict | None:
    if cost is None:
        return None
    return {str(l): c for l, c in sorted(cost.as_dict().items(), reverse=True)}


def _emit(args, payload: dict, text_lines: list[str]):
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        for line in text_lines:
            print(line)


def _coherence_words(qp: QuantifiedProgram, winning: bool) -> str:
    if qp.q1 is Quantifier.EXISTS:
        return "COHERENT" if winning else "INCOHERENT"
    return "INCOHERENT" if winning else "COHERENT"


def _cmd_solve(args) -> int:
    qp = _load(args.file)
    if not qp.alternating:
        print(
            "error: solve requires alternating quantifiers; "
            "use the reference subcommand for uniform ones",
            file=sys.stderr,
        )
        return EXIT_INPUT
    cfg = _config(args)
    res = find_winning_move(qp, cfg)
    for d in res.diagnostics:
        print(f"diagnostic: {d}", file=sys.stderr)
    if res.outcome is Outcome.UNKNOWN:
        print(f"UNKNOWN: {res.reason}", file=sys.stderr)
        return EXIT_UNKNOWN

    if args.paranoid and res.outcome is Outcome.NO_WINNING_MOVE:
        try:
            ref_coherent = reference.coherent(qp, cfg, cap=PARANOID_CAP)
            engine_coherent = qp.q1 is not Quantifier.EXISTS
            if ref_coherent != engine_coherent:
                print(
                    "PARANOID DISCREPANCY: engine and reference disagree "
                    f"(engine coherent={engine_coherent}, reference coherent={ref_coherent})",
                    file=sys.stderr,
                )
                return 1
        except reference.CapExceeded:
            print("paranoid check skipped: instance above enumeration cap", file=sys.stderr)

    status = _coherence_words(qp, res.winning)
    lines = [status]
    if res.winning:
        lines.append("move: " + " ".join(_move_list(res.move)))
    payload = {
        "status": status.lower(),
        "move": _move_list(res.move) if res.winning else None,
        "cost": None,
        "stats": {
            "iterations": res.iterations,
            "oracle_calls": res.oracle_calls,
            "countermoves": len(res.countermoves),
        },
    }
    _emit(args, payload, lines)
    return EXIT_OK


def _cmd_optimize(args) -> int:
    qp = _load(args.file)
    cfg = _config(args)
    run = solve_upper if args.strategy == "upper" else solve_lower
    res = run(qp, cfg)
    if res.outcome is OptOutcome.UNKNOWN:
        print(f"UNKNOWN: {res.reason}", file=sys.stderr)
        return EXIT_UNKNOWN
    if res.outcome is OptOutcome.NO_QAS:
        _emit(
            args,
            {"status": "no_qas", "move": None, "cost": None, "stats": {"oracle_calls": res.oracle_calls}},
            ["NO QUANTIFIED ANSWER SET"],
        )
        return EXIT_OK
    lines = [
        "OPTIMAL",
        "move: " + " ".join(_move_list(res.move)),
        "cost: " + (str(res.cost) if res.cost is not None else "{}"),
    ]
    payload = {
        "status": "optimal",
        "move": _move_list(res.move),
        "cost": _cost_json(res.cost),
        "stats": {"qas_found": res.qas_found, "oracle_calls": res.oracle_calls},
    }
    _emit(args, payload, lines)
    return EXIT_OK


def _cmd_reference(args) -> int:
    qp = _load(args.file)
    cfg = _config(args)
    rep = reference.report(qp, cfg, cap=args.cap, workers=args.workers)
    status = "COHERENT" if rep.coherent else "INCOHERENT"
    lines = [status]
    if rep.qas:
        lines.append(f"quantified answer sets: {len(rep.qas)}")
        lines.append("optimal move: " + " ".join(_move_list(rep.opt_qas[0])))
        lines.append("optimal cost: " + str(rep.opt_cost))
    payload = {
        "status": status.lower(),
        "move": _move_list(rep.opt_qas[0]) if rep.opt_qas else None,
        "cost": _cost_json(rep.opt_cost),
        "stats": {"qas": len(rep.qas)},
    }
    _emit(args, payload, lines)
    return EXIT_OK


def _cmd_probe(args) -> int:
    version = probe(_config(args))
    print(version)
    return EXIT_OK


def _cmd_gen_qbf(args) -> int:
    rng = SplitMix64(args.seed)
    phi = random_qbf(rng, args.x, args.y, args.clauses)
    text = qbf_instance_text(phi, f"x={args.x} y={args.y} clauses={args.clauses} seed={args.seed}")
    _write_out(args.output, text)
    return EXIT_OK


def _cmd_gen_cc(args) -> int:
    text = cc_instance_text(args.n, args.density, args.seed)
    _write_out(args.output, text)
    return EXIT_OK


def _write_out(path: str | None, text: str):
    if path and path != "-":
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _bench_cost(cost) -> str:
    if cost is None:
        return ""
    return ";".join(f"{l}:{c}" for l, c in sorted(cost.as_dict().items(), reverse=True))


def _bench_one(path: str, mode: str, solver: str | None, timeout: float) -> dict:
    row = {
        "instance": path,
        "mode": mode,
        "outcome": "error",
        "cost": "",
        "time_s": 0.0,
        "oracle_calls": "",
        "iterations": "",
    }
    start = time.monotonic()
    try:
        qp = _load(path)
        cfg = SolverConfig(command=solver, timeout=timeout)
        if mode == "engine":
            res = find_winning_move(qp, cfg)
            if res.outcome is Outcome.UNKNOWN:
                row["outcome"] = "unknown"
            else:
                row["outcome"] = _coherence_words(qp, res.winning).lower()
            row["oracle_calls"] = res.oracle_calls
            row["iterations"] = res.iterations
        elif mode == "reference":
            row["outcome"] = "coherent" if reference.coherent(qp, cfg) else "incoherent"
        else:
            run = solve_upper if mode == "upper" else solve_lower
            res = run(qp, cfg)
            row["outcome"] = res.outcome.value
            row["cost"] = _bench_cost(res.cost)
            row["oracle_calls"] = res.oracle_calls
            row["iterations"] = res.qas_found
    except (_InputError, ParseError) as exc:
        row["outcome"] = f"input_error"
        print(f"{path}: {exc}", file=sys.stderr)
    except (OracleError, GroundingError) as exc:
        row["outcome"] = "solver_error"
        print(f"{path}: {exc}", file=sys.stderr)
    except reference.ReferenceUnknown:
        row["outcome"] = "unknown"
    row["time_s"] = round(time.monotonic() - start, 3)
    return row


def _cmd_bench(args) -> int:
    fields = ["instance", "mode", "outcome", "cost", "time_s", "oracle_calls", "iterations"]
    rows = []
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(
                pool.map(
                    _bench_one,
                    args.instances,
                    [args.mode] * len(args.instances),
                    [args.solver] * len(args.instances),
                    [args.timeout] * len(args.instances),
                )
            )
    else:
        rows = [_bench_one(p, args.mode, args.solver, args.timeout) for p in args.instances]
    out = sys.stdout if not args.output or args.output == "-" else open(args.output, "w")
    try:
        writer = csv.DictWriter(out, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="caspr", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--solver", default=None, help="external solver command (default: builtin)")
        p.add_argument("--timeout", type=float, default=300.0, help="per-oracle-call timeout (s)")
        p.add_argument("--json", action="store_true", help="machine-readable output")

    p = sub.add_parser("solve", help="decide coherence via CEGAR")
    p.add_argument("file")
    common(p)
    p.add_argument("--paranoid", action="store_true", help="re-verify negative answers with the reference evaluator")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("optimize", help="compute an optimal quantified answer set")
    p.add_argument("file")
    p.add_argument("--strategy", choices=["upper", "lower"], required=True)
    common(p)
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("reference", help="nested enumeration evaluator (ground truth)")
    p.add_argument("file")
    common(p)
    p.add_argument("--cap", type=int, default=reference.DEFAULT_MOVE_CAP)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_reference)

    p = sub.add_parser("probe", help="check the configured solver answers the protocol")
    common(p)
    p.set_defaults(func=_cmd_probe)

    p = sub.add_parser("gen-qbf", help="random forall-exists QBF instance")
    p.add_argument("--x", type=int, default=3)
    p.add_argument("--y", type=int, default=3)
    p.add_argument("--clauses", type=int, default=5)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=_cmd_gen_qbf)

    p = sub.add_parser("gen-cc", help="Erdős–Rényi clique-coloring instance")
    p.add_argument("n", type=int)
    p.add_argument("density", type=float, choices=[0.25, 0.50, 0.75])
    p.add_argument("seed", type=int)
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=_cmd_gen_cc)

    p = sub.add_parser("bench", help="run a set of instances, emit CSV")
    p.add_argument("instances", nargs="+")
    p.add_argument("--mode", choices=["engine", "reference", "upper", "lower"], default="engine")
    p.add_argument("--solver", default=None)
    p.add_argument("--timeout", type=float, default=300.0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=_cmd_bench)

    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (_InputError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except reference.CapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SolverSpawnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (OracleError, GroundingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except reference.ReferenceUnknown as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNKNOWN


if __name__ == "__main__":
    sys.exit(main())
